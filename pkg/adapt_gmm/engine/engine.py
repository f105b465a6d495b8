"""The reveal loop of the AdaPT_g procedure.

All maskable hypotheses start in the masking set M_0. At each step the engine counts the masked blue (A_t) and masked
red (R_t) hypotheses, stops and rejects the masked red ones as soon as the estimate (1 + A_t) / (zeta R_t) falls to the
target level, and otherwise asks a reveal policy which masked hypotheses to unmask next. The policy only ever sees an
AnalystView, which carries no p-value or bit of a masked hypothesis.

Attributes:
    trace_columns (list[str]): Column order of the per-step trace.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from adapt_gmm.configuration import defaults
from adapt_gmm.masking.hypotheses import HypothesisRecord, HypothesisTable, NullType
from adapt_gmm.masking.masking import MaskingParams, mask_array
from adapt_gmm.masking.transforms import revealed_sign, z_magnitude
from adapt_gmm.engine.policies import AnalystView, RevealPolicy, RevealRequest


logger = logging.getLogger(__name__)

trace_columns = ["step", "masked", "a_count", "r_count", "fdp_hat", "revealed", "batch", "note"]


class ProtocolError(RuntimeError):
    """A reveal policy broke its contract (empty, repeated, oversized or out-of-set request)."""


@dataclass
class MaskState:
    """Mutable state of one run.

        Attributes:
            masked (np.ndarray): Membership of the masking set M_t.
            bits (np.ndarray): Blue bits b_i, hidden from policies for masked hypotheses.
            step (int): Number of reveals so far.
    """

    masked: np.ndarray
    bits: np.ndarray
    step: int = 0

    @property
    def a_count(self) -> int:
        return int(np.sum(self.masked & (self.bits == 1)))

    @property
    def r_count(self) -> int:
        return int(np.sum(self.masked & (self.bits == 0)))

    @property
    def masked_count(self) -> int:
        return int(np.sum(self.masked))


@dataclass(frozen=True)
class TraceRecord:
    step: int
    masked: int
    a_count: int
    r_count: int
    fdp_hat: float
    revealed: int = -1
    batch: int = 0
    note: str = ""


@dataclass(frozen=True)
class RunResult:
    """Outcome of a run.

        Attributes:
            rejected (np.ndarray): Sorted indices of the rejected hypotheses.
            trace (tuple): TraceRecord for every step, starting with step 0.
            stop_step (int): Step at which the estimate reached alpha, None for NoRejections.
            alpha (float): Target FDR level.
            params (MaskingParams): Masking parameters used.
            reveal_order (tuple): Indices in the order they were unmasked.
            notes (tuple): Messages of the policy, for example fit fallbacks.
    """

    rejected: np.ndarray
    trace: tuple
    stop_step: Optional[int]
    alpha: float
    params: MaskingParams
    reveal_order: tuple = ()
    notes: tuple = field(default_factory=tuple)

    @property
    def no_rejections(self) -> bool:
        return self.stop_step is None

    @property
    def fdp_hat_path(self) -> list:
        return [(record.step, record.a_count, record.r_count, record.fdp_hat) for record in self.trace]

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame([record.__dict__ for record in self.trace], columns=trace_columns)


def fdp_hat(a: int, r: int, zeta: float) -> float:
    """Estimated false discovery proportion (1 + a) / (zeta r), infinite for r = 0."""
    if a < 0 or r < 0:
        raise ValueError(f"Expected nonnegative counts but found a={a}, r={r}.")
    if r == 0:
        return float("inf")
    return (1.0 + a) / (zeta * r)


def adapt_thresholds(m0: int, alpha: float, zeta: float) -> np.ndarray:
    """Thresholds s_t = (alpha zeta (m0 - t) - 1) / (1 + alpha zeta) for t = 1, ..., m0.

    With one reveal per step A_t + R_t = m0 - t, so A_t <= s_t holds exactly when (1 + A_t) / (zeta R_t) <= alpha
    with R_t > 0. The card game verifier uses these as its stopping thresholds.
    """
    t = np.arange(1, m0 + 1)
    return (alpha * zeta * (m0 - t) - 1.0) / (1.0 + alpha * zeta)


def reached(estimate: float, alpha: float) -> bool:
    """Whether the estimated FDP is at or below the target level."""
    return estimate <= alpha + defaults.FDP_TOL


def default_batch_size(m0: int) -> int:
    return max(1, m0 // defaults.BATCH_DIVISOR)


def _as_table(records: Union[HypothesisTable, Sequence[HypothesisRecord]]) -> HypothesisTable:
    if isinstance(records, HypothesisTable):
        table = records
    else:
        table = HypothesisTable.from_records(list(records))
    if len(table) == 0:
        raise ValueError("Expected at least one hypothesis.")
    return table


def _model_scale(table: HypothesisTable) -> tuple:
    """z-values, standard errors and null type the analyst works with.

    Tables without z-values are modeled on the right-tailed scale z = Phi^{-1}(1 - p) with unit standard error.
    """
    if table.has_z:
        return table.z, table.sigma, table.null
    null = NullType.one_sided_right()
    return z_magnitude(table.p, np.ones(len(table)), null), np.ones(len(table)), null


def _build_view(table, state, m, maskable, z_model, sigma, null, sign, params, batch_size) -> AnalystView:
    masked = state.masked.copy()
    known = ~masked
    return AnalystView(
        x=table.x,
        m=m,
        maskable=maskable,
        masked=masked,
        revealed_bits=np.where(known, state.bits, -1),
        revealed_p=np.where(known, table.p, np.nan),
        revealed_z=np.where(known, z_model, np.nan),
        sigma=sigma,
        sign=sign,
        null=null,
        params=params,
        a_count=state.a_count,
        r_count=state.r_count,
        step=state.step,
        batch_size=batch_size,
    )


def initial_view(records: Union[HypothesisTable, Sequence[HypothesisRecord]],
                 params: MaskingParams,
                 masked: Optional[np.ndarray]=None,
                 batch_size: Optional[int]=None) -> AnalystView:
    """The view a policy gets for the given masking set, by default M_0.

    Args:
        records (HypothesisTable): Hypotheses.
        params (MaskingParams): Masking parameters.
        masked (np.ndarray): Boolean masking set, intersected with the maskable hypotheses.
        batch_size (int): Request size reported in the view.

    Returns:
        The AnalystView.
    """
    table = _as_table(records)
    m, maskable, bits = mask_array(table.p, params)
    z_model, sigma, null = _model_scale(table)
    sign = revealed_sign(table.z, bits) if table.null.is_point and table.has_z else None
    in_set = maskable.copy() if masked is None else maskable & np.asarray(masked, dtype=bool)
    state = MaskState(masked=in_set, bits=bits, step=int(np.sum(maskable & ~in_set)))
    batch_size = default_batch_size(int(np.sum(maskable))) if batch_size is None else batch_size
    return _build_view(table, state, m, maskable, z_model, sigma, null, sign, params, batch_size)


def _validate_request(request, state: MaskState, batch_size: int) -> tuple:
    if isinstance(request, RevealRequest):
        indices, note = request.indices, request.note
    else:
        indices, note = request, ""
    indices = np.asarray(list(indices), dtype=int)

    if len(indices) == 0:
        raise ProtocolError("The reveal policy returned an empty request.")
    if len(indices) > batch_size:
        raise ProtocolError(f"The reveal policy requested {len(indices)} indices, at most {batch_size} allowed.")
    if len(np.unique(indices)) != len(indices):
        raise ProtocolError(f"The reveal policy repeated indices in {indices.tolist()}.")
    if np.any((indices < 0) | (indices >= len(state.masked))) or not np.all(state.masked[indices]):
        raise ProtocolError(f"The reveal policy requested indices outside the masking set: {indices.tolist()}.")
    return indices, note


def run(records: Union[HypothesisTable, Sequence[HypothesisRecord]],
        params: MaskingParams,
        alpha: float,
        policy: RevealPolicy,
        batch_size: Optional[int]=None) -> RunResult:
    """Runs the procedure until the estimated FDP reaches alpha or the masking set is empty.

    The policy returns ordered batches; the engine unmasks one index at a time and checks the stopping rule after
    every single reveal, so the masking sets form a strictly shrinking nested sequence.

    Args:
        records (HypothesisTable): Hypotheses, as table or list of HypothesisRecord.
        params (MaskingParams): Masking parameters.
        alpha (float): Target FDR level.
        policy (RevealPolicy): Chooses which masked hypotheses to reveal.
        batch_size (int): Maximal request size, default max(1, |M_0| // 50).

    Returns:
        The RunResult.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"Expected an FDR level in (0, 1) but found {alpha}.")
    table = _as_table(records)

    m, maskable, bits = mask_array(table.p, params)
    z_model, sigma, null = _model_scale(table)
    sign = revealed_sign(table.z, bits) if table.null.is_point and table.has_z else None

    state = MaskState(masked=maskable.copy(), bits=bits)
    batch_size = default_batch_size(state.masked_count) if batch_size is None else int(batch_size)
    if batch_size < 1:
        raise ValueError(f"Expected a positive batch size but found {batch_size}.")

    def _record(revealed=-1, batch=0, note=""):
        a, r = state.a_count, state.r_count
        record = TraceRecord(state.step, state.masked_count, a, r, fdp_hat(a, r, params.zeta), revealed, batch, note)
        logger.debug("step %d: |M|=%d A=%d R=%d fdp_hat=%.4g", record.step, record.masked, a, r, record.fdp_hat)
        return record

    trace = [_record()]
    reveal_order, notes = [], []
    batch = 0
    while not reached(trace[-1].fdp_hat, alpha) and state.masked_count > 0:
        view = _build_view(table, state, m, maskable, z_model, sigma, null, sign, params, batch_size)
        indices, note = _validate_request(policy.reveal(view), state, batch_size)
        batch += 1
        if note:
            notes.append(f"batch {batch}: {note}")

        for j, i in enumerate(indices):
            state.masked[i] = False
            state.step += 1
            reveal_order.append(int(i))
            trace.append(_record(revealed=int(i), batch=batch, note=note if j == 0 else ""))
            if reached(trace[-1].fdp_hat, alpha):
                break

    stopped = reached(trace[-1].fdp_hat, alpha)
    rejected = np.flatnonzero(state.masked & (state.bits == 0)) if stopped else np.array([], dtype=int)
    logger.info(
        "Run finished after %d reveals with %d rejections.", state.step, len(rejected)
    )
    return RunResult(
        rejected=rejected,
        trace=tuple(trace),
        stop_step=state.step if stopped else None,
        alpha=alpha,
        params=params,
        reveal_order=tuple(reveal_order),
        notes=tuple(notes),
    )
