"""Covariate-free FDR baselines: Benjamini-Hochberg and Storey's adaptive variant.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from adapt_gmm.configuration import defaults


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RejectionSet:
    """Rejected hypotheses of a baseline.

        Attributes:
            indices (np.ndarray): Sorted indices of the rejected hypotheses.
            threshold (float): Largest rejected p-value, None when nothing is rejected.
    """

    indices: np.ndarray
    threshold: Optional[float] = None

    def __len__(self) -> int:
        return len(self.indices)


def _check(p: np.ndarray, alpha: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) == 0:
        raise ValueError(f"Expected a nonempty vector of p-values but found shape {p.shape}.")
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise ValueError("Expected p-values in [0, 1].")
    if not 0 < alpha < 1:
        raise ValueError(f"Expected an FDR level in (0, 1) but found {alpha}.")
    return p


def bh(p: np.ndarray, alpha: float) -> RejectionSet:
    """Benjamini-Hochberg step-up: rejects every p_i <= p_(k) with k the largest index such that p_(k) <= k alpha / n.

    Args:
        p (np.ndarray): p-values.
        alpha (float): Target FDR level.

    Returns:
        The RejectionSet.
    """
    p = _check(p, alpha)
    n = len(p)
    ordered = np.sort(p)
    below = np.flatnonzero(ordered <= alpha * np.arange(1, n + 1) / n)
    if len(below) == 0:
        return RejectionSet(indices=np.array([], dtype=int))
    threshold = float(ordered[below[-1]])
    return RejectionSet(indices=np.flatnonzero(p <= threshold), threshold=threshold)


def storey_pi0(p: np.ndarray, lam: float=defaults.STOREY_LAMBDA) -> float:
    """Estimated null proportion min(1, (1 + #{p_i > lam}) / (n (1 - lam)))."""
    p = np.asarray(p, dtype=float)
    if not 0 < lam < 1:
        raise ValueError(f"Expected lambda in (0, 1) but found {lam}.")
    return float(min(1.0, (1 + np.sum(p > lam)) / (len(p) * (1 - lam))))


def storey_bh(p: np.ndarray, alpha: float, lam: float=defaults.STOREY_LAMBDA) -> RejectionSet:
    """Benjamini-Hochberg at level alpha / pi0_hat."""
    p = _check(p, alpha)
    pi0 = storey_pi0(p, lam)
    logger.debug("Storey null proportion estimate %.4f.", pi0)
    return bh(p, min(alpha / pi0, 1 - 1e-12))
