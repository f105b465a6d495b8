"""Weighted multinomial classifiers pi_k(x; beta) used in the M-step.

Every classifier is fit on soft labels: row i of the weight matrix holds the weights w_ik of hypothesis i for the K
classes. The fitted model maximizes sum_i sum_k w_ik log pi_k(x_i) minus a ridge penalty on all weights except those
of the constant feature column. Class K is the reference class with score zero.

Fitting never mutates a model; fit() returns a new fitted instance.

Attributes:
    classifier_class_lookup (dict): Lookup with the classifier name (str) as key and the class as value.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, optimize, special

from adapt_gmm.configuration import defaults


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassifierConfig:
    """Hyperparameters shared by the classifiers.

        Attributes:
            ridge (float): Ridge penalty on the weights.
            max_iter (int): Iterations of the quasi-Newton optimizer of the multinomial logit.
            max_epochs (int): Epochs of full-batch gradient ascent for the shallow network.
            learning_rate (float): Initial step size of the network training.
            momentum (float): Momentum of the network training.
            plateau_tol (float): Relative objective gain below which an epoch counts as plateau.
            patience (int): Number of consecutive plateau epochs after which training stops.
            seed (int): Seed of the network initialization.
    """

    ridge: float = defaults.RIDGE
    max_iter: int = 500
    max_epochs: int = defaults.NET_MAX_EPOCHS
    learning_rate: float = defaults.NET_LEARNING_RATE
    momentum: float = defaults.NET_MOMENTUM
    plateau_tol: float = 1e-9
    patience: int = 20
    seed: int = defaults.SEED


def class_probabilities(scores: np.ndarray) -> np.ndarray:
    """Softmax over the class axis of a score matrix of shape (n, K)."""
    return special.softmax(scores, axis=1)


def _with_reference(scores: np.ndarray) -> np.ndarray:
    return np.column_stack([scores, np.zeros(scores.shape[0])])


def _check_weights(features: np.ndarray, weights: np.ndarray):
    if features.ndim != 2 or weights.ndim != 2 or features.shape[0] != weights.shape[0]:
        raise ValueError(f"Expected features (n, d) and weights (n, K) but found {features.shape} and {weights.shape}.")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("Expected finite nonnegative case weights.")


@dataclass(frozen=True)
class Standardizer:
    """Centers and scales the non-constant feature columns."""

    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        scale = features.std(axis=0)
        constant = scale < 1e-12
        mean = np.where(constant, 0.0, features.mean(axis=0))
        return cls(mean=mean, scale=np.where(constant, 1.0, scale), constant=constant)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.scale


class ClassifierModel(ABC):
    """Weighted multinomial probability model.

        Attributes:
            n_classes (int): Number of classes K.
            config (ClassifierConfig): Hyperparameters.
    """

    name = "classifier"

    def __init__(self, n_classes: int, config: Optional[ClassifierConfig]=None):
        if n_classes < 1:
            raise ValueError(f"Expected at least one class but found {n_classes}.")
        self.n_classes = n_classes
        self.config = ClassifierConfig() if config is None else config

    @abstractmethod
    def fit(self, features: np.ndarray, weights: np.ndarray, warm_start: Optional["ClassifierModel"]=None) \
            -> "ClassifierModel":
        pass

    @abstractmethod
    def log_proba(self, features: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def n_params(self) -> int:
        pass

    def penalty(self) -> float:
        return 0.0

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return np.exp(self.log_proba(features))

    def log_likelihood(self, features: np.ndarray, weights: np.ndarray) -> float:
        """Weighted log-likelihood sum_i sum_k w_ik log pi_k(x_i)."""
        log_p = self.log_proba(features)
        return float(np.sum(np.where(weights > 0, weights * log_p, 0.0)))

    def objective(self, features: np.ndarray, weights: np.ndarray) -> float:
        """Penalized weighted log-likelihood maximized by fit()."""
        return self.log_likelihood(features, weights) - self.penalty()

    def to_dict(self) -> dict:
        return {"name": self.name, "n_classes": self.n_classes, "n_params": self.n_params()}


class InterceptOnlyClassifier(ClassifierModel):
    """Covariate-free proportions pi_k, fit in closed form as weighted class frequencies."""

    name = "intercept"

    def __init__(self, n_classes: int, config: Optional[ClassifierConfig]=None, proportions=None):
        super(InterceptOnlyClassifier, self).__init__(n_classes, config)
        if proportions is None:
            proportions = np.full(n_classes, 1.0 / n_classes)
        self.proportions = np.asarray(proportions, dtype=float)

    def fit(self, features, weights, warm_start=None):
        weights = np.asarray(weights, dtype=float)
        totals = weights.sum(axis=0)
        if totals.sum() <= 0:
            raise ValueError("Expected a positive total weight.")
        proportions = np.maximum(totals / totals.sum(), 1e-300)
        return InterceptOnlyClassifier(self.n_classes, self.config, proportions / proportions.sum())

    def log_proba(self, features):
        return np.tile(np.log(self.proportions), (np.asarray(features).shape[0], 1))

    def n_params(self):
        return self.n_classes - 1

    def to_dict(self):
        lookup = super(InterceptOnlyClassifier, self).to_dict()
        lookup["proportions"] = self.proportions.tolist()
        return lookup


class MultinomialLogitClassifier(ClassifierModel):
    """Softmax regression log pi_k(x) = psi(x) beta_k - log sum_j exp(psi(x) beta_j) with beta_K = 0.

        Attributes:
            beta (np.ndarray): Coefficients of shape (d_kept, K - 1) on the standardized kept columns.
            kept (np.ndarray): Indices of the feature columns kept after removing collinear ones.
            standardizer (Standardizer): Feature standardization.
    """

    name = "logit"

    def __init__(self, n_classes: int, config: Optional[ClassifierConfig]=None, beta=None, kept=None,
                 standardizer=None, input_dim: Optional[int]=None):
        super(MultinomialLogitClassifier, self).__init__(n_classes, config)
        self.beta = beta
        self.kept = kept
        self.standardizer = standardizer
        self.input_dim = input_dim

    def _design(self, features: np.ndarray) -> np.ndarray:
        return self.standardizer.transform(features)[:, self.kept]

    def _penalty_mask(self) -> np.ndarray:
        return ~self.standardizer.constant[self.kept]

    def fit(self, features, weights, warm_start=None):
        features = np.asarray(features, dtype=float)
        weights = np.asarray(weights, dtype=float)
        _check_weights(features, weights)
        if features.shape[1] < 1:
            raise ValueError("Expected at least one feature column.")
        K = weights.shape[1]
        if K != self.n_classes:
            raise ValueError(f"Expected weights for {self.n_classes} classes but found {K}.")

        standardizer = Standardizer.fit(features)
        design = standardizer.transform(features)
        kept = _independent_columns(design)
        if len(kept) < design.shape[1]:
            logger.warning("Dropped %d collinear feature columns.", design.shape[1] - len(kept))
        design = design[:, kept]
        penalized = ~standardizer.constant[kept]
        ridge = self.config.ridge
        total = max(weights.sum(), 1e-300)
        shape = (design.shape[1], K - 1)

        def _negative_objective(flat):
            beta = flat.reshape(shape)
            log_p = special.log_softmax(_with_reference(design @ beta), axis=1)
            value = np.sum(weights * log_p) - ridge * np.sum(beta[penalized] ** 2)
            residual = weights - weights.sum(axis=1, keepdims=True) * np.exp(log_p)
            grad = design.T @ residual[:, :K - 1]
            grad[penalized] -= 2 * ridge * beta[penalized]
            return -value / total, -grad.ravel() / total

        if K == 1:
            return MultinomialLogitClassifier(K, self.config, beta=np.zeros(shape), kept=kept,
                                              standardizer=standardizer, input_dim=features.shape[1])

        start = np.zeros(shape)
        if isinstance(warm_start, MultinomialLogitClassifier) and warm_start.beta is not None \
                and warm_start.beta.shape == shape and np.array_equal(warm_start.kept, kept):
            start = warm_start.beta
        start_value, _ = _negative_objective(start.ravel())

        result = optimize.minimize(
            _negative_objective, start.ravel(), jac=True, method="L-BFGS-B",
            options={"maxiter": self.config.max_iter, "gtol": 1e-10, "ftol": 1e-14},
        )
        beta = result.x.reshape(shape)
        if not np.isfinite(result.fun) or result.fun > start_value:
            beta = start
        if not result.success:
            logger.debug("Multinomial logit stopped early: %s", result.message)

        return MultinomialLogitClassifier(K, self.config, beta=beta, kept=kept, standardizer=standardizer,
                                          input_dim=features.shape[1])

    def log_proba(self, features):
        scores = self._design(np.asarray(features, dtype=float)) @ self.beta
        return special.log_softmax(_with_reference(scores), axis=1)

    def penalty(self):
        return float(self.config.ridge * np.sum(self.beta[self._penalty_mask()] ** 2))

    def n_params(self):
        return len(self.kept) * (self.n_classes - 1)

    def to_dict(self):
        lookup = super(MultinomialLogitClassifier, self).to_dict()
        lookup["beta"] = self.beta.tolist()
        lookup["kept_columns"] = self.kept.tolist()
        return lookup


def _independent_columns(design: np.ndarray, tol: float=1e-9) -> np.ndarray:
    """Indices of a maximal set of linearly independent columns, found by pivoted QR."""
    if design.shape[1] == 1:
        return np.array([0])
    _, r, pivots = linalg.qr(design, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(r))
    rank = int(np.sum(diagonal > tol * max(diagonal[0], 1e-300)))
    return np.sort(pivots[:max(rank, 1)])


def shallow_net_objective(w1: np.ndarray, w2: np.ndarray, design: np.ndarray, weights: np.ndarray, ridge: float,
                          penalized: np.ndarray) -> tuple:
    """Penalized weighted log-likelihood of the network and its gradient.

    The hidden layer is H = expit(design w1) with w1 of shape (d, h); the class scores are [H w2, 0] with w2 of shape
    (h, K - 1). Rows of w1 belonging to constant input columns act as biases and are not penalized.

    Returns:
        Tuple (objective, gradient w1, gradient w2).
    """
    K = w2.shape[1] + 1
    hidden = special.expit(design @ w1)
    log_p = special.log_softmax(_with_reference(hidden @ w2), axis=1)
    value = np.sum(weights * log_p) - ridge * (np.sum(w1[penalized] ** 2) + np.sum(w2 ** 2))

    residual = (weights - weights.sum(axis=1, keepdims=True) * np.exp(log_p))[:, :K - 1]
    grad_w2 = hidden.T @ residual - 2 * ridge * w2
    grad_hidden = residual @ w2.T * hidden * (1.0 - hidden)
    grad_w1 = design.T @ grad_hidden
    grad_w1[penalized] -= 2 * ridge * w1[penalized]
    return float(value), grad_w1, grad_w2


class ShallowNetClassifier(ClassifierModel):
    """One hidden layer of sigmoid units with a softmax output.

        With d input columns (the constant included) the network has (d + K - 1) h weights. Training is full-batch
        gradient ascent with momentum; a step that lowers the objective is rejected, the momentum is reset and the
        step size halved, so the recorded objective path never decreases.

        Attributes:
            hidden (int): Number of hidden nodes h.
            w1 (np.ndarray): Input to hidden weights of shape (d, h).
            w2 (np.ndarray): Hidden to output weights of shape (h, K - 1).
            history (list[float]): Objective after every accepted epoch.
    """

    name = "nnet"

    def __init__(self, n_classes: int, config: Optional[ClassifierConfig]=None, hidden: int=defaults.HIDDEN_NODES,
                 w1=None, w2=None, standardizer=None, history=None):
        super(ShallowNetClassifier, self).__init__(n_classes, config)
        if hidden < 1:
            raise ValueError(f"Expected at least one hidden node but found {hidden}.")
        self.hidden = hidden
        self.w1 = w1
        self.w2 = w2
        self.standardizer = standardizer
        self.history = [] if history is None else history

    def _initial_weights(self, d: int, K: int, warm_start) -> tuple:
        if isinstance(warm_start, ShallowNetClassifier) and warm_start.w1 is not None \
                and warm_start.w1.shape == (d, self.hidden) and warm_start.w2.shape == (self.hidden, K - 1):
            return warm_start.w1.copy(), warm_start.w2.copy()
        rng = np.random.default_rng(self.config.seed)
        return rng.normal(scale=1.0 / np.sqrt(d), size=(d, self.hidden)), np.zeros((self.hidden, K - 1))

    def fit(self, features, weights, warm_start=None):
        features = np.asarray(features, dtype=float)
        weights = np.asarray(weights, dtype=float)
        _check_weights(features, weights)
        K = weights.shape[1]
        if K != self.n_classes:
            raise ValueError(f"Expected weights for {self.n_classes} classes but found {K}.")

        standardizer = Standardizer.fit(features)
        design = standardizer.transform(features)
        penalized = ~standardizer.constant
        total = max(weights.sum(), 1e-300)
        ridge = self.config.ridge

        def _evaluate(w1, w2):
            value, g1, g2 = shallow_net_objective(w1, w2, design, weights, ridge, penalized)
            return value / total, g1 / total, g2 / total

        w1, w2 = self._initial_weights(design.shape[1], K, warm_start)
        value, g1, g2 = _evaluate(w1, w2)
        if not np.isfinite(value):
            return self._fallback(features, weights, "non-finite initial objective")

        history = [value * total]
        step = self.config.learning_rate
        v1, v2 = np.zeros_like(w1), np.zeros_like(w2)
        failures, plateau = 0, 0
        for _ in range(self.config.max_epochs):
            if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
                failures += 1
                step *= 0.5
                if failures > 20:
                    return self._fallback(features, weights, "persistent non-finite gradients")
                continue

            v1 = self.config.momentum * v1 + step * g1
            v2 = self.config.momentum * v2 + step * g2
            candidate = _evaluate(w1 + v1, w2 + v2)
            if not np.isfinite(candidate[0]) or candidate[0] < value:
                v1, v2 = np.zeros_like(w1), np.zeros_like(w2)
                step *= 0.5
                if step < 1e-12:
                    break
                continue

            gain = candidate[0] - value
            w1, w2 = w1 + v1, w2 + v2
            value, g1, g2 = candidate
            history.append(value * total)
            step = min(step * 1.1, self.config.learning_rate)
            plateau = plateau + 1 if gain <= self.config.plateau_tol * (abs(value) + self.config.plateau_tol) else 0
            if plateau >= self.config.patience:
                break

        return ShallowNetClassifier(K, self.config, hidden=self.hidden, w1=w1, w2=w2, standardizer=standardizer,
                                    history=history)

    def _fallback(self, features, weights, reason: str) -> ClassifierModel:
        logger.warning("Shallow network training failed (%s), fall back to the intercept-only model.", reason)
        return InterceptOnlyClassifier(self.n_classes, self.config).fit(features, weights)

    def log_proba(self, features):
        design = self.standardizer.transform(np.asarray(features, dtype=float))
        hidden = special.expit(design @ self.w1)
        return special.log_softmax(_with_reference(hidden @ self.w2), axis=1)

    def penalty(self):
        penalized = ~self.standardizer.constant
        return float(self.config.ridge * (np.sum(self.w1[penalized] ** 2) + np.sum(self.w2 ** 2)))

    def n_params(self):
        d = self.w1.shape[0] if self.w1 is not None else 1
        return shallow_net_n_params(d, self.n_classes, self.hidden)

    def to_dict(self):
        lookup = super(ShallowNetClassifier, self).to_dict()
        lookup.update({"hidden": self.hidden, "w1": self.w1.tolist(), "w2": self.w2.tolist()})
        return lookup


def shallow_net_n_params(d: int, n_classes: int, hidden: int) -> int:
    """(d + K - 1) h weights for d input columns including the constant."""
    return (d + n_classes - 1) * hidden


def fit_multinomial_logit(features: np.ndarray, weights: np.ndarray, config: Optional[ClassifierConfig]=None,
                          warm_start: Optional[ClassifierModel]=None) -> MultinomialLogitClassifier:
    """Fits the ridge-penalized multinomial logit on soft labels."""
    weights = np.asarray(weights, dtype=float)
    return MultinomialLogitClassifier(weights.shape[1], config).fit(features, weights, warm_start=warm_start)


def fit_shallow_net(features: np.ndarray, weights: np.ndarray, hidden: int=defaults.HIDDEN_NODES,
                    config: Optional[ClassifierConfig]=None, warm_start: Optional[ClassifierModel]=None) \
        -> ClassifierModel:
    """Fits the one-hidden-layer network on soft labels, or the intercept-only model if training breaks down."""
    weights = np.asarray(weights, dtype=float)
    return ShallowNetClassifier(weights.shape[1], config, hidden=hidden).fit(features, weights, warm_start=warm_start)


classifier_class_lookup = {
    "intercept": InterceptOnlyClassifier,
    "logit": MultinomialLogitClassifier,
    "nnet": ShallowNetClassifier,
}


def make_classifier(name: str, n_classes: int, config: Optional[ClassifierConfig]=None,
                    hidden: int=defaults.HIDDEN_NODES) -> ClassifierModel:
    """Unfitted classifier by name."""
    if name not in classifier_class_lookup:
        raise ValueError(f"Unknown classifier '{name}'. Expected one of {list(classifier_class_lookup)}.")
    if n_classes == 1:
        return InterceptOnlyClassifier(n_classes, config)
    if name == "nnet":
        return ShallowNetClassifier(n_classes, config, hidden=hidden)
    return classifier_class_lookup[name](n_classes, config)
