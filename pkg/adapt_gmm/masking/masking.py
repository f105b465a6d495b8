"""The masking function g(p) and its inverse.

The masking function hides whether a p-value lies in the red region [0, alpha_m] or in the blue region [lam, nu]. Both
regions are mapped onto [0, alpha_m]; the blue one is squeezed by the stretch factor zeta = (nu - lam) / alpha_m.
p-values outside both regions are never masked.

Attributes:
    TENT (Shape): g decreases on the blue region, g(0) = g(nu).
    COMB (Shape): g increases on the blue region, g(0) = g(lam).
"""

import math
import logging
from enum import Enum
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from adapt_gmm.configuration import defaults
from adapt_gmm.masking.hypotheses import NullType


logger = logging.getLogger(__name__)


class Shape(str, Enum):
    TENT = "tent"
    COMB = "comb"


TENT = Shape.TENT
COMB = Shape.COMB


@dataclass(frozen=True)
class MaskingParams:
    """Parameters of the masking function.

        Attributes:
            alpha_m (float): Upper end of the red region.
            lam (float): Lower end of the blue region.
            nu (float): Upper end of the blue region.
            shape (Shape): Orientation of the map from the blue onto the red region.
    """

    alpha_m: float
    lam: float
    nu: float
    shape: Shape = Shape.TENT

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if not 0 < self.alpha_m <= self.lam < self.nu <= 1:
            raise ValueError(
                f"Expected 0 < alpha_m <= lambda < nu <= 1 but found alpha_m={self.alpha_m}, lambda={self.lam}, "
                f"nu={self.nu}."
            )

    @property
    def zeta(self) -> float:
        """Stretch factor, the ratio of the blue to the red region width."""
        return (self.nu - self.lam) / self.alpha_m

    def r_min(self, alpha: float) -> int:
        return r_min(self, alpha)

    def to_dict(self) -> dict:
        lookup = asdict(self)
        lookup["shape"] = self.shape.value
        lookup["zeta"] = self.zeta
        return lookup


@dataclass(frozen=True)
class MaskedValue:
    """The analyst-visible masked value of one p-value.

        Attributes:
            m (float): g(p).
            is_maskable (bool): True iff p lies in the red or in the blue region.
    """

    m: float
    is_maskable: bool


def default_params(n: int, alpha: float, nu_override: Optional[float]=None, null: Optional[NullType]=None) \
        -> MaskingParams:
    """Default masking parameters for n hypotheses tested at FDR level alpha.

    The stretch factor is zeta = max{2, min{1/alpha, 300/(n alpha)}} and alpha_m = lam = nu / (zeta + 1), so that
    small problems get a large zeta and with it a small minimal rejection count. Interval nulls use the comb shape.

    Args:
        n (int): Number of hypotheses.
        alpha (float): Target FDR level in (0, 1).
        nu_override (float): Upper end of the blue region, 0.9 by default.
        null (NullType): Null hypothesis, decides the shape.

    Returns:
        The MaskingParams.
    """
    if n < 1:
        raise ValueError(f"Expected at least one hypothesis but found n={n}.")
    if not 0 < alpha < 1:
        raise ValueError(f"Expected an FDR level in (0, 1) but found {alpha}.")

    nu = defaults.DEFAULT_NU if nu_override is None else float(nu_override)
    zeta = max(defaults.MIN_ZETA, min(1.0 / alpha, defaults.MAX_ZETA_N_SCALE / (n * alpha)))
    alpha_m = nu / (zeta + 1.0)
    shape = Shape.COMB if null is not None and null.is_interval else Shape.TENT
    return MaskingParams(alpha_m=alpha_m, lam=alpha_m, nu=nu, shape=shape)


def symmetric_params() -> MaskingParams:
    """The symmetric masking m = min(p, 1 - p) with zeta = 1."""
    return MaskingParams(alpha_m=0.5, lam=0.5, nu=1.0, shape=Shape.TENT)


def r_min(params: MaskingParams, alpha: float) -> int:
    """Smallest nonzero number of rejections, ceil(1 / (zeta alpha))."""
    return int(math.ceil(1.0 / (params.zeta * alpha) - 1e-9))


def _validate_p(p: np.ndarray):
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        bad = p[~np.isfinite(p) | (p < 0) | (p > 1)]
        raise ValueError(f"Expected p-values in [0, 1] but found {bad[:5]}.")


def clamp(p):
    """Clamps p-values to [P_CLAMP, 1 - P_CLAMP]."""
    return np.clip(p, defaults.P_CLAMP, 1.0 - defaults.P_CLAMP)


def mask_array(p: np.ndarray, params: MaskingParams) -> tuple:
    """Masks an array of p-values.

    Args:
        p (np.ndarray): p-values in [0, 1].
        params (MaskingParams): Masking parameters.

    Returns:
        Tuple (m, maskable, bits) of arrays with the masked values, the maskable flags and the blue bits.
    """
    p = np.asarray(p, dtype=float)
    _validate_p(p)
    p = clamp(p)

    blue = (p >= params.lam) & (p <= params.nu)
    red = (p <= params.alpha_m) & ~blue
    if params.shape is Shape.TENT:
        m_blue = (params.nu - p) / params.zeta
    else:
        m_blue = (p - params.lam) / params.zeta
    m_blue = np.clip(m_blue, 0.0, params.alpha_m)

    m = np.where(blue, m_blue, p)
    return m, blue | red, blue.astype(int)


def candidate_p_values(m: np.ndarray, params: MaskingParams) -> tuple:
    """The two p-values p_0 = m and p_1 consistent with a masked value m in [0, alpha_m].

    Returns:
        Tuple (p0, p1) of arrays.
    """
    m = np.asarray(m, dtype=float)
    if params.shape is Shape.TENT:
        p1 = params.nu - params.zeta * m
    else:
        p1 = params.lam + params.zeta * m
    return m, np.clip(p1, params.lam, params.nu)


def mask(p: float, params: MaskingParams) -> MaskedValue:
    """Masks a single p-value, see mask_array()."""
    m, maskable, _ = mask_array(np.array([p], dtype=float), params)
    return MaskedValue(m=float(m[0]), is_maskable=bool(maskable[0]))


def unmask_candidates(masked: MaskedValue, params: MaskingParams) -> list:
    """Lists the (bit, p-value) pairs consistent with the masked value.

    Example:
        With alpha_m=0.2, lam=0.3, nu=0.9 and the tent shape, m=0.01 gives [(0, 0.01), (1, 0.87)].

    Args:
        masked (MaskedValue): Output of mask().
        params (MaskingParams): Parameters used for masking.

    Returns:
        Two candidates for maskable values, the single candidate (0, m) otherwise.
    """
    if not masked.is_maskable:
        return [(0, masked.m)]
    if not 0 <= masked.m <= params.alpha_m + 1e-12:
        raise ValueError(f"Masked value {masked.m} is not in [0, alpha_m={params.alpha_m}].")
    p0, p1 = candidate_p_values(np.array([masked.m]), params)
    return [(0, float(p0[0])), (1, float(p1[0]))]
