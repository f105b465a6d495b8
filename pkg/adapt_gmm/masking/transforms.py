"""Maps between p-values and z-values for the one-sided, point and interval nulls.

For a test statistic z with standard error sigma:

    one-sided right     p = 1 - Phi(z / sigma)
    one-sided left      p = Phi(z / sigma)
    point               p = 2 (1 - Phi(|z| / sigma))
    interval            p = 1 - Phi(|z| / sigma + delta / sigma) + Phi(-|z| / sigma + delta / sigma)

The inverse maps reconstruct the z candidates of a masked hypothesis, and log_p_value_slope() gives log |dp/dz|, the
Jacobian needed to turn densities of z into densities of p.
"""

import logging
from typing import NamedTuple, Optional

import numpy as np
from scipy import special

from adapt_gmm.configuration import defaults
from adapt_gmm.masking.hypotheses import NullType, NullKind
from adapt_gmm.masking.masking import MaskedValue, MaskingParams, candidate_p_values, clamp


logger = logging.getLogger(__name__)

_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


class InversionError(ArithmeticError):
    """The root finder of the interval null did not reach the required accuracy."""


class ZCandidate(NamedTuple):
    b: int
    b_prime: Optional[int]
    z: float


class CandidateTable(NamedTuple):
    """Candidate z-values of n hypotheses, padded to C columns.

        Attributes:
            z (np.ndarray): Candidate z-values of shape (n, C), NaN where invalid.
            bits (np.ndarray): Blue bit of each candidate, shape (n, C).
            sign_bits (np.ndarray): Indicator 1{z > 0} for interval nulls, -1 otherwise, shape (n, C).
            valid (np.ndarray): Whether the candidate is consistent with what is known, shape (n, C).
    """
    z: np.ndarray
    bits: np.ndarray
    sign_bits: np.ndarray
    valid: np.ndarray


def p_value_array(z, sigma, null: NullType) -> np.ndarray:
    """Vectorized p_value()."""
    u = np.asarray(z, dtype=float) / np.asarray(sigma, dtype=float)
    if null.kind is NullKind.ONE_SIDED_RIGHT:
        p = special.ndtr(-u)
    elif null.kind is NullKind.ONE_SIDED_LEFT:
        p = special.ndtr(u)
    elif null.kind is NullKind.POINT:
        p = 2.0 * special.ndtr(-np.abs(u))
    else:
        r = null.delta / np.asarray(sigma, dtype=float)
        p = special.ndtr(-(np.abs(u) + r)) + special.ndtr(r - np.abs(u))
    return np.clip(p, 0.0, 1.0)


def p_value(z: float, sigma: float, null: NullType) -> float:
    """p-value of the statistic z with standard error sigma under the given null."""
    if sigma <= 0:
        raise ValueError(f"Expected a positive standard error but found {sigma}.")
    return float(p_value_array(np.array([z]), np.array([sigma]), null)[0])


def _interval_magnitude(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solves 1 - Phi(u + r) + Phi(r - u) = p for u >= 0 by bisection on [0, INTERVAL_Z_MAX + r]."""
    p, r = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(r, dtype=float))

    def _p_of(u):
        return special.ndtr(-(u + r)) + special.ndtr(r - u)

    lo = np.zeros(p.shape)
    hi = defaults.INTERVAL_Z_MAX + np.maximum(r, 0.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = _p_of(mid) > p
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
            break
    u = 0.5 * (lo + hi)

    error = np.abs(_p_of(u) - p)
    if np.any(error >= defaults.INVERSION_TOL):
        raise InversionError(f"Interval null inversion stopped at |p(z) - p| = {error.max():.3e}.")
    return u


def z_magnitude(p, sigma, null: NullType, delta_over_sigma=None) -> np.ndarray:
    """|z| implied by p under the null (for one-sided nulls the signed right-tailed value).

    Args:
        p (np.ndarray): p-values, clamped to [P_CLAMP, 1 - P_CLAMP].
        sigma (np.ndarray): Standard errors.
        null (NullType): Null hypothesis.
        delta_over_sigma (np.ndarray): Interval half width in units of sigma, default null.delta / sigma.

    Returns:
        Array of z-values.
    """
    p = clamp(np.asarray(p, dtype=float))
    sigma = np.asarray(sigma, dtype=float)
    if null.is_one_sided:
        return -sigma * special.ndtri(p)
    if null.is_point:
        return -sigma * special.ndtri(0.5 * p)
    r = null.delta / sigma if delta_over_sigma is None else delta_over_sigma
    return sigma * _interval_magnitude(p, r)


def candidate_z_table(m, sigma, null: NullType, params: MaskingParams, sign=None, maskable=None) -> CandidateTable:
    """Reconstructs the candidate z-values of masked hypotheses.

    Column layout: one-sided and point nulls use the candidates b = 0, 1. Interval nulls use (b, b') in the order
    (0, 0), (0, 1), (1, 0), (1, 1) where b' = 1{z > 0}. Hypotheses that are not maskable only keep their b = 0
    candidates.

    Args:
        m (np.ndarray): Masked values.
        sigma (np.ndarray): Standard errors, scalar or per hypothesis.
        null (NullType): Null hypothesis.
        params (MaskingParams): Masking parameters.
        sign (np.ndarray): Revealed signs s = sgn(z)(-1)^b, required for point nulls.
        maskable (np.ndarray): Maskable flags, default all.

    Returns:
        The CandidateTable.
    """
    m = np.asarray(m, dtype=float)
    n = len(m)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    maskable = np.ones(n, dtype=bool) if maskable is None else np.asarray(maskable, dtype=bool)

    p0, p1 = candidate_p_values(np.where(maskable, m, 0.0), params)
    p0 = np.where(maskable, p0, m)
    a0 = z_magnitude(p0, sigma, null)
    a1 = z_magnitude(p1, sigma, null)

    if null.is_interval:
        z = np.stack([-a0, a0, -a1, a1], axis=1)
        bits = np.tile([0, 0, 1, 1], (n, 1))
        sign_bits = np.tile([0, 1, 0, 1], (n, 1))
        valid = np.stack([np.ones(n, dtype=bool), np.ones(n, dtype=bool), maskable, maskable], axis=1)
    else:
        if null.kind is NullKind.ONE_SIDED_LEFT:
            z = np.stack([-a0, -a1], axis=1)
        elif null.is_point:
            if sign is None:
                raise ValueError("Point nulls need the revealed signs s = sgn(z)(-1)^b.")
            s = np.where(np.asarray(sign, dtype=float) < 0, -1.0, 1.0)
            z = np.stack([s * a0, -s * a1], axis=1)
        else:
            z = np.stack([a0, a1], axis=1)
        bits = np.tile([0, 1], (n, 1))
        sign_bits = np.full((n, 2), -1)
        valid = np.stack([np.ones(n, dtype=bool), maskable], axis=1)

    z = np.where(valid, z, np.nan)
    return CandidateTable(z=z, bits=bits, sign_bits=sign_bits, valid=valid)


def z_candidates(masked: MaskedValue,
                 sigma: float,
                 null: NullType,
                 side_info: Optional[int],
                 params: MaskingParams) -> list:
    """Lists the z-values consistent with a masked value.

    Args:
        masked (MaskedValue): Masked p-value.
        sigma (float): Standard error.
        null (NullType): Null hypothesis.
        side_info (int): Revealed sign s = sgn(z)(-1)^b, given iff the null is a point null.
        params (MaskingParams): Masking parameters.

    Returns:
        List of ZCandidate(b, b_prime, z), b_prime is None unless the null is an interval null.
    """
    if sigma <= 0:
        raise ValueError(f"Expected a positive standard error but found {sigma}.")
    if null.is_point != (side_info is not None):
        raise ValueError("The sign s = sgn(z)(-1)^b is revealed for point nulls and only for point nulls.")

    table = candidate_z_table(
        m=np.array([masked.m]),
        sigma=sigma,
        null=null,
        params=params,
        sign=None if side_info is None else np.array([side_info]),
        maskable=np.array([masked.is_maskable]),
    )
    return [
        ZCandidate(
            b=int(table.bits[0, c]),
            b_prime=int(table.sign_bits[0, c]) if null.is_interval else None,
            z=float(table.z[0, c]),
        ) for c in range(table.z.shape[1]) if table.valid[0, c]
    ]


def revealed_sign(z, bits) -> np.ndarray:
    """The side information s = sgn(z)(-1)^b revealed for point nulls, with sgn(0) = +1."""
    s = np.where(np.asarray(z, dtype=float) < 0, -1, 1)
    return s * np.where(np.asarray(bits) == 1, -1, 1)


def log_p_value_slope(z, sigma, null: NullType, delta=None) -> np.ndarray:
    """log |dp/dz| of the p-value transform.

        one-sided   log phi(z; 0, sigma^2)
        point       log 2 phi(|z|; 0, sigma^2)
        interval    log [phi(|z| - delta; 0, sigma^2) + phi(|z| + delta; 0, sigma^2)]

    Args:
        z (np.ndarray): z-values, NaN entries propagate.
        sigma (np.ndarray): Standard errors broadcastable against z.
        null (NullType): Null hypothesis.
        delta (np.ndarray): Interval half width broadcastable against z, default null.delta.

    Returns:
        Array shaped like z.
    """
    z = np.asarray(z, dtype=float)
    sigma = np.asarray(sigma, dtype=float)

    def _log_phi(v):
        return -0.5 * (v / sigma) ** 2 - np.log(sigma) - _LOG_SQRT_2PI

    if null.is_one_sided:
        return _log_phi(z)
    if null.is_point:
        return np.log(2.0) + _log_phi(np.abs(z))
    delta = null.delta if delta is None else np.asarray(delta, dtype=float)
    return np.logaddexp(_log_phi(np.abs(z) - delta), _log_phi(np.abs(z) + delta))
