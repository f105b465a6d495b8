"""Brute-force checks of two properties of the procedure.

conservatism_check() estimates by Monte Carlo how much the blue count overestimates the false discoveries under a
fixed threshold. card_game_bruteforce() enumerates every adaptive reveal policy of a small card game in exact
rational arithmetic and checks that revealing in descending blue probability is optimal for every horizon.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from adapt_gmm.engine.engine import adapt_thresholds
from adapt_gmm.masking.hypotheses import NullType
from adapt_gmm.masking.masking import MaskingParams, mask_array
from adapt_gmm.masking.transforms import p_value_array


logger = logging.getLogger(__name__)

MAX_CARDS = 6


@dataclass(frozen=True)
class ThresholdSpec:
    """Constant rejection threshold s <= alpha_m on the masked values."""

    s: float
    params: MaskingParams

    def __post_init__(self):
        if not 0 < self.s <= self.params.alpha_m:
            raise ValueError(f"Expected a threshold in (0, alpha_m={self.params.alpha_m}] but found {self.s}.")


@dataclass(frozen=True)
class NullSpec:
    """Generator of null p-values.

        Attributes:
            n (int): Number of nulls per replication.
            mean (float): Mean of the null z-values; None for exactly uniform p-values.
            null (NullType): Null used to turn z-values into p-values.
    """

    n: int = 1000
    mean: Optional[float] = None
    null: NullType = field(default_factory=NullType.one_sided_right)

    def draw(self, reps: int, rng: np.random.Generator) -> np.ndarray:
        if self.mean is None:
            return rng.random((reps, self.n))
        z = rng.normal(self.mean, 1.0, size=(reps, self.n))
        return p_value_array(z, np.ones_like(z), self.null)


@dataclass(frozen=True)
class ConservatismReport:
    """Monte Carlo estimate of E[(A + 1) / zeta] - E[V].

        Attributes:
            mean_difference (float): Estimated difference.
            standard_error (float): Its Monte Carlo standard error.
            mean_blue (float): Mean of A.
            mean_false (float): Mean of V.
            reference (float): 1 / zeta, the difference for exactly uniform nulls.
            reps (int): Number of replications.
    """

    mean_difference: float
    standard_error: float
    mean_blue: float
    mean_false: float
    reference: float
    reps: int


def conservatism_check(threshold: ThresholdSpec, null: NullSpec, reps: int=10000, seed: int=0) \
        -> ConservatismReport:
    """Compares the estimate (A + 1) / zeta with the number V of rejected nulls under a fixed threshold.

    With the threshold s every null with masked value m <= s counts as rejected (V) when red and towards A when blue.

    Args:
        threshold (ThresholdSpec): Fixed threshold and masking parameters.
        null (NullSpec): Null p-value generator.
        reps (int): Number of replications.
        seed (int): Seed.

    Returns:
        The ConservatismReport.
    """
    if reps < 2:
        raise ValueError(f"Expected at least two replications but found {reps}.")
    rng = np.random.default_rng(seed)
    p = null.draw(reps, rng)
    m, maskable, bits = mask_array(p.ravel(), threshold.params)
    below = (maskable & (m <= threshold.s)).reshape(p.shape)
    bits = bits.reshape(p.shape)
    A = np.sum(below & (bits == 1), axis=1)
    V = np.sum(below & (bits == 0), axis=1)

    zeta = threshold.params.zeta
    difference = (A + 1) / zeta - V
    return ConservatismReport(
        mean_difference=float(np.mean(difference)),
        standard_error=float(np.std(difference, ddof=1) / np.sqrt(reps)),
        mean_blue=float(np.mean(A)),
        mean_false=float(np.mean(V)),
        reference=1.0 / zeta,
        reps=reps,
    )


@dataclass(frozen=True)
class CardGame:
    """Cards with independent colors B_i ~ Bern(q_i), blue meaning B_i = 1.

    The player learns S_0 = sum B_i, then flips one card per turn. The game ends at the first turn t with
    S_t <= s_t, S_t being the number of face-down blue cards.

        Attributes:
            q (tuple): Blue probabilities as Fractions.
            thresholds (tuple): s_1, ..., s_n.
    """

    q: tuple
    thresholds: tuple

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(Fraction(v).limit_denominator(10 ** 12) if isinstance(v, float)
                                            else Fraction(v) for v in self.q))
        object.__setattr__(self, "thresholds", tuple(self.thresholds))
        if not 1 <= len(self.q) <= MAX_CARDS:
            raise ValueError(f"Expected between 1 and {MAX_CARDS} cards but found {len(self.q)}.")
        if len(self.thresholds) != len(self.q):
            raise ValueError(f"Expected {len(self.q)} thresholds but found {len(self.thresholds)}.")
        if any(v < 0 or v > 1 for v in self.q):
            raise ValueError(f"Expected probabilities in [0, 1] but found {self.q}.")

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def descending_order(self) -> tuple:
        """Cards by descending q, ties by index."""
        return tuple(sorted(range(self.n), key=lambda i: (-self.q[i], i)))

    @classmethod
    def from_procedure(cls, q: Sequence, alpha: float, zeta: float) -> "CardGame":
        """Game whose stopping rule is the stopping rule of the procedure on len(q) masked hypotheses."""
        return cls(q=tuple(q), thresholds=tuple(adapt_thresholds(len(q), alpha, zeta).tolist()))

    def sum_probability(self, cards: frozenset, total: int) -> Fraction:
        """P[sum_{i in cards} B_i = total]."""
        return _sum_probability(self.q, cards, total)

    def initial_probability(self, s0: int) -> Fraction:
        return self.sum_probability(frozenset(range(self.n)), s0)


@lru_cache(maxsize=None)
def _sum_probability(q: tuple, cards: frozenset, total: int) -> Fraction:
    if total < 0 or total > len(cards):
        return Fraction(0)
    distribution = [Fraction(1)]
    for i in sorted(cards):
        shifted = [Fraction(0)] + distribution
        distribution = [(1 - q[i]) * a + q[i] * b for a, b in zip(distribution + [Fraction(0)], shifted)]
    return distribution[total]


def _blue_probability(game: CardGame, cards: frozenset, blue: int, card: int) -> Fraction:
    """P[B_card = 1 | sum over cards = blue]."""
    total = game.sum_probability(cards, blue)
    if total == 0:
        return Fraction(0)
    return game.q[card] * game.sum_probability(cards - {card}, blue - 1) / total


def _stop_probability(game: CardGame, s0: int, horizon: int, adaptive: bool) -> Fraction:
    """P[tau <= horizon | S_0 = s0] under the best adaptive policy or the descending-q fixed policy."""
    order = game.descending_order

    @lru_cache(maxsize=None)
    def _value(cards: frozenset, blue: int, turn: int) -> Fraction:
        if turn >= horizon or not cards:
            return Fraction(0)
        threshold = game.thresholds[turn]
        choices = sorted(cards) if adaptive else [next(i for i in order if i in cards)]
        best = Fraction(0)
        for card in choices:
            q_blue = _blue_probability(game, cards, blue, card)
            rest = cards - {card}
            value = Fraction(0)
            if q_blue > 0:
                value += q_blue * (1 if blue - 1 <= threshold else _value(rest, blue - 1, turn + 1))
            if q_blue < 1:
                value += (1 - q_blue) * (1 if blue <= threshold else _value(rest, blue, turn + 1))
            best = max(best, value)
        return best

    return _value(frozenset(range(game.n)), s0, 0)


def fixed_order_stop_probabilities(game: CardGame, order: Sequence[int], s0: int) -> list:
    """P[tau <= t | S_0 = s0] for t = 1, ..., n when the cards are flipped in the given order."""
    if sorted(order) != list(range(game.n)):
        raise ValueError(f"Expected a permutation of {game.n} cards but found {order}.")
    results = []
    for horizon in range(1, game.n + 1):
        total, stopped = game.initial_probability(s0), Fraction(0)
        if total == 0:
            results.append(Fraction(0))
            continue
        for colors in itertools.product((0, 1), repeat=game.n):
            if sum(colors) != s0:
                continue
            weight = Fraction(1)
            for i, color in enumerate(colors):
                weight *= game.q[i] if color else 1 - game.q[i]
            remaining = s0
            for turn, card in enumerate(order[:horizon]):
                remaining -= colors[card]
                if remaining <= game.thresholds[turn]:
                    stopped += weight
                    break
        results.append(stopped / total)
    return results


@dataclass(frozen=True)
class CardGameVerdict:
    """Outcome of card_game_bruteforce().

        Attributes:
            optimal (bool): Whether the fixed policy attains the optimum for every S_0 and horizon.
            fixed (dict): (s0, t) -> P[tau <= t | S_0 = s0] of the descending-q fixed policy.
            best (dict): (s0, t) -> the same probability under the best adaptive policy.
            marginal_fixed (tuple): P[tau <= t] of the fixed policy, averaged over S_0.
            marginal_best (tuple): P[tau <= t] of the best adaptive policy, averaged over S_0.
    """

    optimal: bool
    fixed: dict
    best: dict
    marginal_fixed: tuple
    marginal_best: tuple


def card_game_bruteforce(game: CardGame) -> CardGameVerdict:
    """Compares the descending-q fixed policy with the best adaptive policy of the game.

    For every initial count S_0 with positive probability and every horizon t the optimum over all adaptive policies
    (decision trees over the revealed colors) is computed by backward induction over information states, which is
    exhaustive enumeration with shared subtrees.

    Args:
        game (CardGame): The game, at most MAX_CARDS cards.

    Returns:
        The CardGameVerdict.
    """
    fixed, best = {}, {}
    marginal_fixed = [Fraction(0)] * game.n
    marginal_best = [Fraction(0)] * game.n
    for s0 in range(game.n + 1):
        weight = game.initial_probability(s0)
        if weight == 0:
            continue
        for horizon in range(1, game.n + 1):
            fixed[(s0, horizon)] = _stop_probability(game, s0, horizon, adaptive=False)
            best[(s0, horizon)] = _stop_probability(game, s0, horizon, adaptive=True)
            marginal_fixed[horizon - 1] += weight * fixed[(s0, horizon)]
            marginal_best[horizon - 1] += weight * best[(s0, horizon)]

    optimal = all(fixed[key] == best[key] for key in best)
    if not optimal:
        logger.warning("Descending order is not optimal for q=%s, s=%s.", game.q, game.thresholds)
    return CardGameVerdict(optimal, fixed, best, tuple(marginal_fixed), tuple(marginal_best))


def random_card_game(n: int, rng: np.random.Generator, denominator: int=20) -> CardGame:
    """Game with q on a grid of the given denominator and a random nonincreasing threshold sequence."""
    q = tuple(Fraction(int(k), denominator) for k in rng.integers(0, denominator + 1, size=n))
    steps = rng.integers(0, 2, size=n)
    start = int(rng.integers(-1, n))
    thresholds = tuple(int(v) for v in start - np.cumsum(steps))
    return CardGame(q=q, thresholds=thresholds)
