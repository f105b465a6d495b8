"""Conditional Gaussian mixture working model fit by EM on the candidate z-values.

Conditional on the covariates the signal theta_i follows sum_k pi_k(x_i) N(mu_k, tau2_k), and z_i | theta_i is
N(theta_i, sigma_i^2). For a masked hypothesis the full data is (z_i, gamma_i) with z_i one of the candidates of its
masked value and gamma_i the component. The E-step gives every (component, candidate) pair the weight

    v_ikc proportional to pi_k(x_i) N(z_ic; mu_k, tau2_k + sigma_i^2) zeta^{b_c} / |dp/dz|(z_ic),

the M-step refits the classifier on the per-component totals and every (mu_k, tau2_k) on the weighted candidates.
Unmasked hypotheses have a single candidate, their known z-value.
"""

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.cluster.vq import kmeans2
from scipy.special import expit, logsumexp

from adapt_gmm.configuration import defaults
from adapt_gmm.classifier.features import FeatureMap
from adapt_gmm.classifier.models import ClassifierConfig, ClassifierModel, InterceptOnlyClassifier, \
    make_classifier
from adapt_gmm.engine.oracle import component_log_density, gaussian_log_density
from adapt_gmm.workmodel.data import ModelData


logger = logging.getLogger(__name__)

m_step_methods = ["auto", "closed-form", "quasi-newton"]


class FitError(RuntimeError):
    """The working model could not be fit to the masked data."""


@dataclass(frozen=True)
class EMConfig:
    """Settings of one EM fit.

        Attributes:
            max_iter (int): Maximal number of EM iterations.
            tol (float): Relative change of the penalized log-likelihood below which EM stops.
            tau2_floor_fraction (float): tau2 floor as fraction of the variance of the pooled candidates.
            symmetric (bool): Whether every component is the equal mixture of N(mu_k, .) and N(-mu_k, .).
            m_step (str): One of m_step_methods. Auto uses the closed form when all sigma_i are equal.
            seed (int): Seed of the k-means initialization.
            kmeans_restarts (int): Number of k-means runs, the one with the smallest distortion is kept.
            classifier (ClassifierConfig): Hyperparameters of the classifier.
    """

    max_iter: int = defaults.EM_MAX_ITER
    tol: float = defaults.EM_TOL
    tau2_floor_fraction: float = defaults.TAU2_FLOOR_FRACTION
    symmetric: bool = False
    m_step: str = "auto"
    seed: int = defaults.SEED
    kmeans_restarts: int = defaults.KMEANS_RESTARTS
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)

    def __post_init__(self):
        if self.m_step not in m_step_methods:
            raise ValueError(f"Unknown M-step method '{self.m_step}'. Expected one of {m_step_methods}.")
        if self.max_iter < 1:
            raise ValueError(f"Expected at least one EM iteration but found {self.max_iter}.")


@dataclass(frozen=True, eq=False)
class GmmParams:
    """Parameters of the working model.

        Attributes:
            mu (np.ndarray): Component locations.
            tau2 (np.ndarray): Component variances.
            classifier (ClassifierModel): Fitted pi_k(x).
            feature_map (FeatureMap): Fitted featurization fed to the classifier.
            symmetric (bool): Whether the components are symmetrized around zero.
    """

    mu: np.ndarray
    tau2: np.ndarray
    classifier: ClassifierModel
    feature_map: FeatureMap = field(default_factory=FeatureMap)
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mu", np.atleast_1d(np.asarray(self.mu, dtype=float)))
        object.__setattr__(self, "tau2", np.atleast_1d(np.asarray(self.tau2, dtype=float)))
        if self.mu.shape != self.tau2.shape:
            raise ValueError(f"Expected as many locations as variances but found {self.mu.shape}, {self.tau2.shape}.")
        if np.any(self.tau2 < 0):
            raise ValueError(f"Expected nonnegative component variances but found {self.tau2}.")
        if self.classifier.n_classes != len(self.mu):
            raise ValueError(f"Expected a classifier with {len(self.mu)} classes but found "
                             f"{self.classifier.n_classes}.")

    @property
    def n_components(self) -> int:
        return len(self.mu)

    def log_proportions(self, x: np.ndarray) -> np.ndarray:
        return self.classifier.log_proba(self.feature_map.transform(x))

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "tau2": self.tau2.tolist(),
            "symmetric": self.symmetric,
            "features": self.feature_map.name,
            "knots": None if self.feature_map.knots is None else [list(k) for k in self.feature_map.knots],
            "classifier": self.classifier.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class WeightTable:
    """Normalized E-step weights.

        Attributes:
            w (np.ndarray): Weights of shape (n, K, C), summing to one per hypothesis.
            bits (np.ndarray): Blue bit per candidate, shape (n, C).
            positive_share (np.ndarray): For symmetric components the share of each weight owed to N(mu_k, .),
                shape (n, K, C); None otherwise.
    """

    w: np.ndarray
    bits: np.ndarray
    positive_share: Optional[np.ndarray] = None

    def by_component(self) -> np.ndarray:
        """w_ik = sum_c w_ikc, shape (n, K)."""
        return self.w.sum(axis=2)

    def by_bit(self) -> np.ndarray:
        """w_ikb, shape (n, K, 2)."""
        blue = np.sum(self.w * (self.bits == 1)[:, None, :], axis=2)
        red = np.sum(self.w * (self.bits == 0)[:, None, :], axis=2)
        return np.stack([red, blue], axis=2)

    def blue(self) -> np.ndarray:
        """sum_k w_ik1, the estimated probability that the hypothesis is blue."""
        return self.by_bit()[:, :, 1].sum(axis=1)


@dataclass(frozen=True)
class FitResult:
    """Outcome of fit_em().

        Attributes:
            params (GmmParams): Final parameters.
            log_likelihood (float): Observed-data log-likelihood of the final parameters.
            objective_path (tuple): Penalized observed-data log-likelihood after initialization and every iteration.
            iterations (int): Number of EM iterations performed.
            converged (bool): Whether the relative change fell below the tolerance.
            tau2_floor (float): Lower bound used for the component variances.
            flags (tuple): Diagnostic messages, for example kept component parameters.
    """

    params: GmmParams
    log_likelihood: float
    objective_path: tuple
    iterations: int
    converged: bool
    tau2_floor: float
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "log_likelihood": self.log_likelihood,
            "objective_path": list(self.objective_path),
            "iterations": self.iterations,
            "converged": self.converged,
            "tau2_floor": self.tau2_floor,
            "flags": list(self.flags),
            "params": self.params.to_dict(),
        }


def _log_weights(data: ModelData, params: GmmParams) -> np.ndarray:
    """Unnormalized log v_ikc, shape (n, K, C)."""
    log_pi = params.log_proportions(data.x)
    log_k = component_log_density(data.z_filled, data.sigma2, params.mu, params.tau2, params.symmetric)
    return log_pi[:, :, None] + log_k + data.log_offset[:, None, :]


def _positive_share(data: ModelData, params: GmmParams) -> np.ndarray:
    z = data.z_filled[:, None, :]
    var = params.tau2[None, :, None] + data.sigma2[:, None, None]
    mu = params.mu[None, :, None]
    return expit(gaussian_log_density(z, mu, var) - gaussian_log_density(z, -mu, var))


def e_step(data: ModelData, params: GmmParams) -> tuple:
    """Posterior weights of every (component, candidate) pair.

    Args:
        data (ModelData): Masked data.
        params (GmmParams): Current parameters.

    Returns:
        Tuple of the WeightTable and the observed-data log-likelihood.
    """
    log_v = _log_weights(data, params)
    log_total = logsumexp(log_v, axis=(1, 2))
    if not np.all(np.isfinite(log_total)):
        raise FitError("Some hypothesis has zero likelihood under the current parameters.")
    w = np.exp(log_v - log_total[:, None, None])
    share = _positive_share(data, params) if params.symmetric else None
    return WeightTable(w=w, bits=data.bits, positive_share=share), float(np.sum(log_total))


def observed_log_likelihood(data: ModelData, params: GmmParams) -> float:
    """sum_i log sum_k sum_c v_ikc, the log-likelihood of the masked data."""
    return e_step(data, params)[1]


def tau2_floor(data: ModelData, fraction: float=defaults.TAU2_FLOOR_FRACTION) -> float:
    pooled = data.pooled_candidates()
    spread = float(np.var(pooled)) if len(pooled) > 1 else 1.0
    return fraction * max(spread, 1e-8)


def _component_samples(data: ModelData, weights: WeightTable, k: int) -> tuple:
    """Values, weights and noise variances the k-th component is fit on."""
    valid = data.valid
    z = data.z[valid]
    w = weights.w[:, k, :][valid]
    sigma2 = np.broadcast_to(data.sigma2[:, None], data.z.shape)[valid]
    if weights.positive_share is None:
        return z, w, sigma2
    share = weights.positive_share[:, k, :][valid]
    return np.concatenate([z, -z]), np.concatenate([w * share, w * (1 - share)]), np.concatenate([sigma2, sigma2])


def closed_form_component(z: np.ndarray, w: np.ndarray, sigma2: float, floor: float) -> tuple:
    """Weighted mean and excess variance, exact when all noise variances equal sigma2."""
    total = np.sum(w)
    mu = np.sum(w * z) / total
    var = np.sum(w * (z - mu) ** 2) / total
    return float(mu), float(max(var - sigma2, floor))


def quasi_newton_component(z: np.ndarray, w: np.ndarray, sigma2: np.ndarray, floor: float,
                           start: tuple) -> tuple:
    """Maximizes sum w log N(z; mu, tau2 + sigma2) over (mu, log tau2) with L-BFGS-B.

    Returns:
        Tuple of mu, tau2 and whether the optimizer converged.
    """
    total = np.sum(w)

    def _negative(theta):
        mu, s = theta
        tau2 = np.exp(s)
        v = tau2 + sigma2
        r = z - mu
        value = np.sum(w * (0.5 * np.log(2 * np.pi * v) + r ** 2 / (2 * v))) / total
        grad_mu = -np.sum(w * r / v) / total
        grad_s = np.sum(w * (1 / (2 * v) - r ** 2 / (2 * v ** 2))) * tau2 / total
        return value, np.array([grad_mu, grad_s])

    spread = float(np.sum(w * (z - np.sum(w * z) / total) ** 2) / total)
    upper = np.log(max(10 * spread, 10 * floor, 1.0))
    x0 = np.array([start[0], np.clip(np.log(max(start[1], floor)), np.log(floor), upper)])
    start_value, _ = _negative(x0)
    result = optimize.minimize(
        _negative, x0, jac=True, method="L-BFGS-B",
        bounds=[(None, None), (np.log(floor), upper)],
        options={"maxiter": 200, "gtol": 1e-12, "ftol": 1e-15},
    )
    converged = bool(result.success) or float(np.max(np.abs(result.jac))) < 1e-6
    if not np.isfinite(result.fun) or result.fun > start_value:
        return float(start[0]), float(start[1]), False
    return float(result.x[0]), float(np.exp(result.x[1])), converged


def m_step(data: ModelData,
           weights: WeightTable,
           params: GmmParams,
           template: Optional[ClassifierModel]=None,
           floor: Optional[float]=None,
           method: str="auto") -> tuple:
    """Refits the classifier and the component parameters on the E-step weights.

    The classifier update is kept only if it does not lower the penalized weighted log-likelihood. A component whose
    quasi-Newton fit does not converge keeps its previous parameters.

    Args:
        data (ModelData): Masked data.
        weights (WeightTable): E-step weights.
        params (GmmParams): Current parameters, also the warm start.
        template (ClassifierModel): Unfitted classifier, defaults to the kind of the current one.
        floor (float): Lower bound for tau2.
        method (str): One of m_step_methods.

    Returns:
        Tuple of the new GmmParams and a list of diagnostic flags.
    """
    if method not in m_step_methods:
        raise ValueError(f"Unknown M-step method '{method}'. Expected one of {m_step_methods}.")
    floor = tau2_floor(data) if floor is None else floor
    flags = []

    features = params.feature_map.transform(data.x)
    target = weights.by_component()
    template = params.classifier if template is None else template
    classifier = template.fit(features, target, warm_start=params.classifier)
    if classifier.objective(features, target) < params.classifier.objective(features, target):
        classifier = params.classifier

    equal_noise = np.ptp(data.sigma2) <= 1e-12 * max(1.0, float(np.max(data.sigma2)))
    closed_form = method == "closed-form" or (method == "auto" and equal_noise)
    if method == "closed-form" and not equal_noise:
        raise ValueError("The closed-form M-step needs equal noise variances.")

    mu, tau2 = params.mu.copy(), params.tau2.copy()
    for k in range(params.n_components):
        z, w, sigma2 = _component_samples(data, weights, k)
        if np.sum(w) <= 1e-12:
            flags.append(f"component {k} has no weight, parameters kept")
            continue
        if closed_form:
            mu[k], tau2[k] = closed_form_component(z, w, float(data.sigma2[0]), floor)
        else:
            mu_k, tau2_k, converged = quasi_newton_component(z, w, sigma2, floor, (mu[k], tau2[k]))
            if converged:
                mu[k], tau2[k] = mu_k, tau2_k
            else:
                flags.append(f"component {k} did not converge, parameters kept")

    return replace(params, mu=mu, tau2=tau2, classifier=classifier), flags


def _kmeans_labels(values: np.ndarray, n_components: int, config: EMConfig) -> np.ndarray:
    rng = np.random.default_rng(config.seed)
    best, best_distortion = None, np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(max(1, config.kmeans_restarts)):
            centroids, labels = kmeans2(values.reshape(-1, 1), n_components, minit="++",
                                        seed=int(rng.integers(2 ** 31)))
            distortion = float(np.sum((values - centroids[labels, 0]) ** 2))
            if distortion < best_distortion:
                best, best_distortion = labels, distortion
    return _split_empty_clusters(values, best, n_components)


def _split_empty_clusters(values: np.ndarray, labels: np.ndarray, n_components: int) -> np.ndarray:
    labels = labels.copy()
    for k in range(n_components):
        if np.any(labels == k):
            continue
        largest = np.argmax(np.bincount(labels, minlength=n_components))
        members = np.flatnonzero(labels == largest)
        upper = members[values[members] > np.median(values[members])]
        if len(upper) == 0:
            upper = members[len(members) // 2:]
        labels[upper] = k
    return labels


def init_params(data: ModelData,
                n_components: int,
                feature_map: Optional[FeatureMap]=None,
                config: Optional[EMConfig]=None,
                floor: Optional[float]=None) -> GmmParams:
    """Initial parameters from k-means on the pooled candidate z-values.

    Component k starts at the mean of cluster k with its variance minus the mean noise variance, and the
    intercept-only classifier starts at the cluster sizes.

    Args:
        data (ModelData): Masked data.
        n_components (int): Number of mixture components K.
        feature_map (FeatureMap): Fitted featurization, intercept only by default.
        config (EMConfig): Seed, restarts and symmetry.
        floor (float): Lower bound for tau2.

    Returns:
        The initial GmmParams.
    """
    config = EMConfig() if config is None else config
    feature_map = FeatureMap() if feature_map is None else feature_map
    floor = tau2_floor(data, config.tau2_floor_fraction) if floor is None else floor
    values = data.pooled_candidates()
    if len(values) < n_components:
        raise FitError(f"Expected at least {n_components} candidate z-values but found {len(values)}.")
    if config.symmetric:
        values = np.abs(values)

    labels = np.zeros(len(values), dtype=int) if n_components == 1 else _kmeans_labels(values, n_components, config)
    noise = float(np.mean(data.sigma2))
    mu, tau2, counts = np.zeros(n_components), np.zeros(n_components), np.zeros(n_components)
    for k in range(n_components):
        members = values[labels == k]
        counts[k] = len(members)
        mu[k] = np.mean(members)
        tau2[k] = max(float(np.var(members)) - noise, floor)

    classifier = InterceptOnlyClassifier(n_components, config.classifier, counts / counts.sum())
    return GmmParams(mu=mu, tau2=tau2, classifier=classifier, feature_map=feature_map, symmetric=config.symmetric)


def fit_em(data: ModelData,
           n_components: int,
           feature_map: Optional[FeatureMap]=None,
           classifier: Union[str, ClassifierModel]="intercept",
           config: Optional[EMConfig]=None,
           init: Optional[GmmParams]=None,
           hidden: int=defaults.HIDDEN_NODES) -> FitResult:
    """Fits the working model by EM.

    The first E-step uses the intercept-only initialization, every later one the classifier of the previous M-step.
    EM stops once the relative change of the penalized log-likelihood falls below config.tol or after
    config.max_iter iterations.

    Args:
        data (ModelData): Masked data.
        n_components (int): Number of mixture components K, reduced if there are fewer distinct candidates.
        feature_map (FeatureMap): Featurization, fit on data.x here.
        classifier (str or ClassifierModel): Classifier name or unfitted classifier.
        config (EMConfig): EM settings.
        init (GmmParams): Warm start, for example the fit of the previous step.
        hidden (int): Hidden nodes of a shallow network classifier.

    Returns:
        The FitResult.
    """
    config = EMConfig() if config is None else config
    feature_map = (FeatureMap() if feature_map is None else feature_map).fit(data.x)
    floor = tau2_floor(data, config.tau2_floor_fraction)

    distinct = len(np.unique(data.pooled_candidates()))
    if distinct < n_components:
        logger.warning("Only %d distinct candidate z-values, reducing K from %d.", distinct, n_components)
        n_components = max(1, distinct)

    if isinstance(classifier, ClassifierModel):
        template = classifier
        if template.n_classes != n_components:
            template = make_classifier(template.name, n_components, template.config,
                                       getattr(template, "hidden", hidden))
    else:
        template = make_classifier(classifier, n_components, config.classifier, hidden)

    if init is not None and init.n_components == n_components:
        params = replace(init, feature_map=feature_map, symmetric=config.symmetric)
    else:
        params = init_params(data, n_components, feature_map, config, floor)

    weights, log_likelihood = e_step(data, params)
    path = [log_likelihood - params.classifier.penalty()]
    flags, converged, iterations = [], False, 0
    for iterations in range(1, config.max_iter + 1):
        params, step_flags = m_step(data, weights, params, template, floor, config.m_step)
        flags.extend(f"iteration {iterations}: {flag}" for flag in step_flags)
        weights, log_likelihood = e_step(data, params)
        path.append(log_likelihood - params.classifier.penalty())
        if not np.isfinite(path[-1]):
            raise FitError(f"Log-likelihood became {path[-1]} in iteration {iterations}.")
        if abs(path[-1] - path[-2]) <= config.tol * max(abs(path[-2]), 1e-12):
            converged = True
            break

    logger.debug("EM with K=%d (%s) stopped after %d iterations at log-likelihood %.6g.",
                 n_components, feature_map.name, iterations, log_likelihood)
    return FitResult(params=params, log_likelihood=log_likelihood, objective_path=tuple(path),
                     iterations=iterations, converged=converged, tau2_floor=floor, flags=tuple(flags))


def q_scores(data: ModelData, params: GmmParams) -> pd.Series:
    """Estimated probability of being blue for every masked hypothesis, indexed by hypothesis."""
    weights, _ = e_step(data, params)
    masked = data.masked_indices
    return pd.Series(weights.blue()[masked], index=masked, name="q_hat")


def log_density(z: np.ndarray, x: np.ndarray, params: GmmParams, sigma2: np.ndarray) -> np.ndarray:
    """Implied log f(z | x) of the working model for z of shape (n,) or (n, C)."""
    z = np.asarray(z, dtype=float)
    squeeze = z.ndim == 1
    z = z[:, None] if squeeze else z
    log_pi = params.log_proportions(x)
    log_k = component_log_density(z, np.asarray(sigma2, dtype=float), params.mu, params.tau2, params.symmetric)
    result = logsumexp(log_pi[:, :, None] + log_k, axis=1)
    return result[:, 0] if squeeze else result
