"""Featurizations psi(x) of the covariates fed to the classifiers.

Attributes:
    feature_kind_names (list[str]): Names of the supported featurizations.
"""

import logging
from enum import Enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline


logger = logging.getLogger(__name__)


class FeatureKind(str, Enum):
    INTERCEPT = "intercept"
    SPLINE = "spline"
    IDENTITY = "identity"


feature_kind_names = [kind.value for kind in FeatureKind]


def spline_knots(x: np.ndarray, df: int) -> np.ndarray:
    """Boundary knots at min and max, df - 1 interior knots at equally spaced quantiles."""
    quantiles = np.linspace(0.0, 1.0, df + 1)
    knots = np.unique(np.quantile(x, quantiles))
    if 1 < len(knots) < df + 1:
        logger.warning("Covariate has ties, spline uses %d instead of %d knots.", len(knots), df + 1)
    return knots


def natural_spline_columns(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Natural cubic spline basis of one covariate without the constant direction.

    The cardinal splines of the knots span all natural cubic splines with these knots. They sum to one, so the first
    one is dropped and len(knots) - 1 columns remain. Beyond the boundary knots the basis continues linearly.
    """
    x = np.asarray(x, dtype=float)
    if len(knots) < 2:
        return np.zeros((len(x), 0))

    spline = CubicSpline(knots, np.eye(len(knots)), bc_type="natural")
    lo, hi = knots[0], knots[-1]
    inside = np.clip(x, lo, hi)
    basis = spline(inside)
    below, above = x < lo, x > hi
    if np.any(below):
        basis[below] = spline(lo)[None, :] + (x[below] - lo)[:, None] * spline(lo, 1)[None, :]
    if np.any(above):
        basis[above] = spline(hi)[None, :] + (x[above] - hi)[:, None] * spline(hi, 1)[None, :]
    return basis[:, 1:]


def spline_basis(x: np.ndarray, df: int) -> np.ndarray:
    """Additive natural cubic spline basis with df columns per covariate.

    Args:
        x (np.ndarray): Covariates of shape (n,) or (n, raw).
        df (int): Degrees of freedom per covariate, at least 2.

    Returns:
        Features of shape (n, df * raw), without intercept. Constant covariates contribute no column.
    """
    return FeatureMap(kind=FeatureKind.SPLINE, df=df).fit(x).transform(x)[:, 1:]


def append_variance_covariate(x: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Appends sigma^2 as covariate when the standard errors differ between hypotheses."""
    sigma = np.asarray(sigma, dtype=float)
    if np.ptp(sigma) <= 0:
        return x
    return np.column_stack([x, sigma ** 2])


@dataclass(frozen=True)
class FeatureMap:
    """Featurization psi(x) with a leading constant column.

        Attributes:
            kind (FeatureKind): Intercept only, natural cubic spline or identity.
            df (int): Spline degrees of freedom per covariate.
            knots (tuple): Knots per covariate, set by fit().
    """

    kind: FeatureKind = FeatureKind.INTERCEPT
    df: Optional[int] = None
    knots: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureKind(self.kind))
        if self.kind is FeatureKind.SPLINE and (self.df is None or self.df < 2):
            raise ValueError(f"Expected spline degrees of freedom of at least 2 but found {self.df}.")

    @property
    def name(self) -> str:
        return f"spline(df={self.df})" if self.kind is FeatureKind.SPLINE else self.kind.value

    def fit(self, x: np.ndarray) -> "FeatureMap":
        """Places the spline knots at the quantiles of the training covariates."""
        if self.kind is not FeatureKind.SPLINE:
            return self
        x = _as_matrix(x)
        if x.shape[0] <= self.df:
            raise ValueError(f"Expected more than df={self.df} hypotheses but found {x.shape[0]}.")
        knots = []
        for j in range(x.shape[1]):
            column_knots = spline_knots(x[:, j], self.df)
            if len(column_knots) < 2:
                logger.warning("Covariate %d is constant, it only enters through the intercept.", j)
            knots.append(tuple(column_knots.tolist()))
        return FeatureMap(kind=self.kind, df=self.df, knots=tuple(knots))

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        intercept = np.ones((x.shape[0], 1))
        if self.kind is FeatureKind.INTERCEPT or x.shape[1] == 0:
            return intercept
        if self.kind is FeatureKind.IDENTITY:
            return np.column_stack([intercept, x])
        if self.knots is None:
            raise ValueError("Call fit() before transform() on a spline feature map.")
        columns = [natural_spline_columns(x[:, j], np.asarray(k)) for j, k in enumerate(self.knots)]
        return np.column_stack([intercept] + columns)

    def output_dim(self, x: np.ndarray) -> int:
        return self.transform(x[:1]).shape[1]


def _as_matrix(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(-1, 1) if x.ndim == 1 else x
