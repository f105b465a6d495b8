"""Default values shared by the library and the command line.

Every CLI flag reads its default from here, so a flag left unset behaves exactly like the library call with no
argument.

Attributes:
    DEFAULT_NU (float): Upper end of the blue region.
    MAX_ZETA_N_SCALE (float): Numerator of the 300/(n alpha) term in the stretch factor heuristic.
    MIN_ZETA (float): Lower bound of the stretch factor heuristic.
    P_CLAMP (float): p-values are clamped to [P_CLAMP, 1 - P_CLAMP] before masking and inversion.
    FDP_TOL (float): Absolute slack of the stopping rule fdp_hat <= alpha, absorbs rounding in zeta.
    INTERVAL_Z_MAX (float): Width of the bisection bracket for |z|/sigma beyond delta/sigma under interval nulls.
    INVERSION_TOL (float): Required accuracy of the p -> z inversion.
    BATCH_DIVISOR (int): The working model is refit about this many times per run.
    EM_MAX_ITER (int): Maximal number of EM iterations per fit.
    EM_TOL (float): Relative change of the log-likelihood below which EM stops.
    TAU2_FLOOR_FRACTION (float): Floor of the component variances relative to the variance of the candidate z.
    KMEANS_RESTARTS (int): Restarts of the K-means initialization.
    RIDGE (float): Ridge penalty on the classifier weights.
    HIDDEN_NODES (int): Hidden nodes of the shallow network.
    STOREY_LAMBDA (float): Censoring point of the Storey null proportion estimator.
    ALPHA (float): Default target FDR level of the command line.
    CRITERION (str): Default information criterion for model selection.
    CLASSIFIER (str): Default classifier of the spline candidates.
    SEED (int): Default master seed.
    CLASSES (tuple): Default numbers of mixture components.
    SPLINE_DFS (tuple): Default spline degrees of freedom of the candidate grid.
"""

DEFAULT_NU = 0.9
MAX_ZETA_N_SCALE = 300.0
MIN_ZETA = 2.0
P_CLAMP = 1e-15
FDP_TOL = 1e-12

INTERVAL_Z_MAX = 40.0
INVERSION_TOL = 1e-10

BATCH_DIVISOR = 50

EM_MAX_ITER = 30
EM_TOL = 1e-6
TAU2_FLOOR_FRACTION = 1e-4
KMEANS_RESTARTS = 10

RIDGE = 1e-4
HIDDEN_NODES = 2
NET_MAX_EPOCHS = 2000
NET_LEARNING_RATE = 0.5
NET_MOMENTUM = 0.9

STOREY_LAMBDA = 0.5

ALPHA = 0.1
CRITERION = "aic"
CLASSIFIER = "logit"
SEED = 0
CLASSES = (2, 3, 4, 5)
SPLINE_DFS = (2, 3, 4)
