"""Generative scenarios with known ground truth.

The logistic scenario draws x_i ~ N(0, 1), gamma_i | x_i ~ Bern(pi_1(x_i)) with pi_1(x) = 0.75 e^{6x-9} / (1 + e^{6x-9}),
theta_i ~ Logistic(2, 1/2) for gamma_i = 1 and theta_i = 0 otherwise, and z_i ~ N(theta_i, 1). The same draws are
tested against a one-sided, a point or an interval null.

Attributes:
    scenario_lookup (dict): Lookup with the scenario name (str) as key and the Scenario as value.
    scenario_names (list[str]): Names of the scenarios.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import expit, logsumexp
from scipy.stats import logistic

from adapt_gmm.configuration import defaults
from adapt_gmm.engine.oracle import TrueModel, component_log_density
from adapt_gmm.masking.hypotheses import HypothesisTable, NullKind, NullType
from adapt_gmm.masking.transforms import p_value_array


logger = logging.getLogger(__name__)

ALTERNATIVE_LOCATION = 2.0
ALTERNATIVE_SCALE = 0.5
INTERVAL_DELTA = 1.0
QUADRATURE_NODES = 80


@dataclass(frozen=True)
class LogisticSimConfig:
    """Settings of a simulation study.

        Attributes:
            n (int): Number of hypotheses per replication.
            replications (int): Number of replications.
            alpha_grid (tuple): Target FDR levels.
            null (NullType): Null hypothesis tested.
            seed (int): Master seed.
            signal_scale (float): Factor on the alternative theta.
            nonnull_scale (float): Factor on pi_1(x), capped at one.
            classes (tuple): Numbers of mixture components of the working model grid.
            spline_dfs (tuple): Spline degrees of freedom of the working model grid.
            classifier (str): Classifier of the spline candidates.
            criterion (str): Information criterion of the model selection.
    """

    n: int = 3000
    replications: int = 50
    alpha_grid: tuple = (0.05, 0.1, 0.2)
    null: NullType = field(default_factory=NullType.one_sided_right)
    seed: int = defaults.SEED
    signal_scale: float = 1.0
    nonnull_scale: float = 1.0
    classes: tuple = defaults.CLASSES
    spline_dfs: tuple = defaults.SPLINE_DFS
    classifier: str = defaults.CLASSIFIER
    criterion: str = defaults.CRITERION

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "classes", tuple(int(k) for k in self.classes))
        object.__setattr__(self, "spline_dfs", tuple(int(df) for df in self.spline_dfs))
        if isinstance(self.null, str):
            object.__setattr__(self, "null", NullType.parse(self.null))
        if self.n < 1 or self.replications < 1:
            raise ValueError(f"Expected positive n and replications but found {self.n}, {self.replications}.")
        if not self.alpha_grid or not all(0 < a < 1 for a in self.alpha_grid):
            raise ValueError(f"Expected FDR levels in (0, 1) but found {self.alpha_grid}.")

    def to_dict(self) -> dict:
        lookup = asdict(self)
        lookup["null"] = str(self.null)
        for key in ("alpha_grid", "classes", "spline_dfs"):
            lookup[key] = list(lookup[key])
        return lookup

    @classmethod
    def from_dict(cls, lookup: dict) -> "LogisticSimConfig":
        known = {key: value for key, value in lookup.items() if key in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True, eq=False)
class SimData:
    """One simulated dataset with its ground truth.

        Attributes:
            table (HypothesisTable): The hypotheses as the procedures see them.
            is_null (np.ndarray): Ground-truth null status.
            theta (np.ndarray): Parameters of interest, NaN where not simulated.
            gamma (np.ndarray): Latent non-null indicators, NaN where not simulated.
            truth (TrueModel): Exact density of z given x, None when unknown.
    """

    table: HypothesisTable
    is_null: np.ndarray
    theta: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None
    truth: Optional[TrueModel] = None

    @property
    def n_nonnull(self) -> int:
        return int(np.sum(~self.is_null))


def pi1(x, nonnull_scale: float=1.0) -> np.ndarray:
    """Non-null probability 0.75 e^{6x-9} / (1 + e^{6x-9}), scaled and capped at one."""
    return np.minimum(1.0, nonnull_scale * 0.75 * expit(6.0 * np.asarray(x, dtype=float) - 9.0))


def null_status(theta: np.ndarray, null: NullType) -> np.ndarray:
    """Ground truth: theta = 0 for point nulls, theta <= 0 (>= 0) for one-sided ones, |theta| <= delta for intervals."""
    if null.is_point:
        return theta == 0
    if null.is_interval:
        return np.abs(theta) <= null.delta
    if null.kind is NullKind.ONE_SIDED_LEFT:
        return theta >= 0
    return theta <= 0


class LogisticTruth(TrueModel):
    """Density of z given x in the logistic scenario.

    The alternative density, Logistic(2 s, s / 2) convolved with N(0, sigma^2), is integrated by Gauss-Hermite
    quadrature.
    """

    def __init__(self, signal_scale: float=1.0, nonnull_scale: float=1.0, nodes: int=QUADRATURE_NODES):
        self.signal_scale = signal_scale
        self.nonnull_scale = nonnull_scale
        points, weights = hermegauss(nodes)
        self._points = points
        self._log_weights = np.log(weights) - 0.5 * np.log(2 * np.pi)

    def alternative_log_density(self, z: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        sigma = np.asarray(sigma, dtype=float).reshape((-1,) + (1,) * (z.ndim - 1))
        theta = z[..., None] - sigma[..., None] * self._points
        log_g = logistic.logpdf(theta, loc=ALTERNATIVE_LOCATION * self.signal_scale,
                                scale=ALTERNATIVE_SCALE * self.signal_scale)
        return logsumexp(log_g + self._log_weights, axis=-1)

    def log_density(self, z, x, sigma):
        z = np.asarray(z, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        x = np.asarray(x, dtype=float).reshape(len(z), -1)
        p1 = pi1(x[:, 0], self.nonnull_scale)[:, None]
        log_null = component_log_density(z, sigma ** 2, [0.0], [0.0])[:, 0, :]
        log_alt = self.alternative_log_density(z, sigma)
        with np.errstate(divide="ignore"):
            return np.logaddexp(np.log1p(-p1) + log_null, np.log(p1) + log_alt)


def gen_logistic(config: LogisticSimConfig, rng: np.random.Generator) -> SimData:
    """Draws one dataset of the logistic scenario.

    Args:
        config (LogisticSimConfig): Size, null type and scales.
        rng (np.random.Generator): Source of randomness.

    Returns:
        The SimData with unit standard errors.
    """
    n = config.n
    x = rng.standard_normal(n)
    gamma = rng.random(n) < pi1(x, config.nonnull_scale)
    alternative = rng.logistic(ALTERNATIVE_LOCATION * config.signal_scale, ALTERNATIVE_SCALE * config.signal_scale,
                               size=n)
    theta = np.where(gamma, alternative, 0.0)
    z = theta + rng.standard_normal(n)
    sigma = np.ones(n)

    table = HypothesisTable.from_arrays(p=p_value_array(z, sigma, config.null), z=z, sigma=sigma, x=x,
                                        null=config.null)
    return SimData(table=table, is_null=null_status(theta, config.null), theta=theta, gamma=gamma.astype(float),
                   truth=LogisticTruth(config.signal_scale, config.nonnull_scale))


def gen_small_sample(config: LogisticSimConfig, rng: np.random.Generator) -> SimData:
    """One p-value of 1e-9 followed by n - 1 uniform null p-values, without covariates or z-values."""
    p = np.concatenate([[1e-9], rng.random(config.n - 1)])
    is_null = np.ones(config.n, dtype=bool)
    is_null[0] = False
    return SimData(table=HypothesisTable.from_arrays(p=p), is_null=is_null)


@dataclass(frozen=True)
class Scenario:
    """A named simulation setting.

        Attributes:
            name (str): Name used on the command line.
            generate (Callable): Function (LogisticSimConfig, Generator) -> SimData.
            null (NullType): Null type of the default configuration.
            n (int): Default number of hypotheses.
            methods (tuple): Methods compared by default.
            description (str): One-line summary.
    """

    name: str
    generate: Callable
    null: NullType
    n: int
    methods: tuple
    description: str = ""

    def default_config(self, **overrides) -> LogisticSimConfig:
        config = LogisticSimConfig(n=self.n, null=self.null)
        return replace(config, **overrides) if overrides else config


scenario_lookup = {
    "logistic-onesided": Scenario(
        "logistic-onesided", gen_logistic, NullType.one_sided_right(), 1000, ("bh", "storey", "adaptg"),
        "Logistic scenario tested against theta <= 0."),
    "logistic-point": Scenario(
        "logistic-point", gen_logistic, NullType.point(), 1000, ("bh", "storey", "adaptg"),
        "Logistic scenario tested against theta = 0."),
    "logistic-interval": Scenario(
        "logistic-interval", gen_logistic, NullType.interval(INTERVAL_DELTA), 1000, ("bh", "storey", "adaptg"),
        "Logistic scenario tested against |theta| <= 1."),
    "spike-at-one": Scenario(
        "spike-at-one", gen_logistic, NullType.interval(INTERVAL_DELTA), 1000, ("adaptg", "adaptg-symmetric"),
        "Interval null whose null p-values pile up near one; default against symmetric masking."),
    "small-sample": Scenario(
        "small-sample", gen_small_sample, NullType.one_sided_right(), 100, ("adaptg", "adaptg-symmetric"),
        "One tiny p-value among uniform nulls; default against symmetric masking."),
}

scenario_names = list(scenario_lookup)


def get_scenario(name: str) -> Scenario:
    if name not in scenario_lookup:
        raise ValueError(f"Unknown scenario '{name}'. Expected one of {scenario_names}.")
    return scenario_lookup[name]
