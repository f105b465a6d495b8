"""Reveal policies and the view of the data they are allowed to see.

Attributes:
    view_fields (tuple[str]): Names of the fields of an AnalystView.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, fields
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from adapt_gmm.masking.hypotheses import NullType
from adapt_gmm.masking.masking import MaskingParams
from adapt_gmm.masking.transforms import CandidateTable, candidate_z_table


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AnalystView:
    """Everything a reveal policy may look at in step t.

        Masked hypotheses expose their covariates, masked value and, for point nulls, the sign s = sgn(z)(-1)^b.
        Unmasked hypotheses additionally expose p, z and the bit. All z-values are on the scale of the working model:
        tables without z-values use z = Phi^{-1}(1 - p), sigma = 1 and a one-sided right null.

        Attributes:
            x (np.ndarray): Covariates of shape (n, d).
            m (np.ndarray): Masked values.
            maskable (np.ndarray): Membership of M_0.
            masked (np.ndarray): Membership of M_t.
            revealed_bits (np.ndarray): Bits of unmasked hypotheses, -1 for masked ones.
            revealed_p (np.ndarray): p-values of unmasked hypotheses, NaN for masked ones.
            revealed_z (np.ndarray): z-values of unmasked hypotheses, NaN for masked ones.
            sigma (np.ndarray): Standard errors.
            sign (np.ndarray): Revealed signs for point nulls, None otherwise.
            null (NullType): Null hypothesis on the working model scale.
            params (MaskingParams): Masking parameters.
            a_count (int): A_t.
            r_count (int): R_t.
            step (int): t.
            batch_size (int): Maximal number of indices a request may contain.
    """

    x: np.ndarray
    m: np.ndarray
    maskable: np.ndarray
    masked: np.ndarray
    revealed_bits: np.ndarray
    revealed_p: np.ndarray
    revealed_z: np.ndarray
    sigma: np.ndarray
    sign: Optional[np.ndarray]
    null: NullType
    params: MaskingParams
    a_count: int
    r_count: int
    step: int
    batch_size: int

    def __len__(self) -> int:
        return len(self.m)

    @property
    def masked_indices(self) -> np.ndarray:
        return np.flatnonzero(self.masked)

    def candidate_table(self) -> CandidateTable:
        """Candidate z-values of all hypotheses.

        Masked hypotheses keep every candidate consistent with m (and the sign for point nulls). Unmasked ones carry
        their known z as the single valid candidate, in the column of their bit (and of 1{z > 0} for interval nulls).
        """
        table = candidate_z_table(
            m=self.m,
            sigma=self.sigma,
            null=self.null,
            params=self.params,
            sign=self.sign,
            maskable=self.maskable,
        )
        known = ~self.masked
        if not np.any(known):
            return table

        z, valid = table.z.copy(), table.valid.copy()
        bits = np.where(known, self.revealed_bits, 0)
        if self.null.is_interval:
            column = 2 * bits + (self.revealed_z > 0).astype(int)
        else:
            column = bits
        rows = np.flatnonzero(known)
        valid[rows] = False
        valid[rows, column[rows]] = True
        z[rows] = np.nan
        z[rows, column[rows]] = self.revealed_z[rows]
        return CandidateTable(z=z, bits=table.bits, sign_bits=table.sign_bits, valid=valid)


view_fields = tuple(f.name for f in fields(AnalystView))


@dataclass(frozen=True)
class RevealRequest:
    """Ordered indices to unmask, with an optional note recorded in the trace."""

    indices: tuple
    note: str = ""


class RevealPolicy(ABC):
    """Chooses which masked hypotheses to unmask next.

        Implementations must behave as a function of the AnalystView and return between one and view.batch_size
        distinct indices of masked hypotheses.
    """

    @abstractmethod
    def reveal(self, view: AnalystView) -> RevealRequest:
        pass

    def diagnostics(self) -> dict:
        return {}


def rank_by_score(indices: Sequence[int], scores: Sequence[float]) -> np.ndarray:
    """Sorts indices by descending score, ties broken by the lower index."""
    indices = np.asarray(indices, dtype=int)
    scores = np.asarray(scores, dtype=float)
    return indices[np.lexsort((indices, -scores))]


def reveal_by_score(scores: Union[Mapping[int, float], Sequence[float]]) -> int:
    """Index with the largest score, the lowest index among ties.

    Args:
        scores (Mapping[int, float]): Score q_i of every masked index, or a sequence indexed by position.

    Returns:
        The index to reveal.
    """
    if isinstance(scores, Mapping):
        indices, values = list(scores.keys()), list(scores.values())
    else:
        indices, values = list(range(len(scores))), list(scores)
    if len(indices) == 0:
        raise ValueError("Expected scores for at least one masked index.")
    return int(rank_by_score(indices, values)[0])


class IndexOrderPolicy(RevealPolicy):
    """Reveals masked hypotheses in index order."""

    def reveal(self, view: AnalystView) -> RevealRequest:
        return RevealRequest(indices=tuple(view.masked_indices[:view.batch_size].tolist()))
