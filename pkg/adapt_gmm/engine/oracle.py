"""The oracle reveal policy for simulations with a known generative model.

For a masked hypothesis the probability of being blue given its covariate and masked value is

    q_i = zeta f(p_{i,1} | x_i) / (f(p_{i,0} | x_i) + zeta f(p_{i,1} | x_i)),

where f(p | x) = f(z | x) / |dp/dz| is the density of the p-value. Revealing in descending q_i is the optimal fixed
order. The helpers in this module evaluate such candidate weights in log space and are shared with the working model.
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import logsumexp

from adapt_gmm.masking.hypotheses import NullType
from adapt_gmm.masking.transforms import CandidateTable, log_p_value_slope
from adapt_gmm.engine.policies import AnalystView, RevealPolicy, RevealRequest, rank_by_score


logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2 * np.pi)


def gaussian_log_density(z, mean, var) -> np.ndarray:
    return -0.5 * (_LOG_2PI + np.log(var) + (z - mean) ** 2 / var)


def component_log_density(z: np.ndarray, sigma2: np.ndarray, mu: np.ndarray, tau2: np.ndarray,
                          symmetric: bool=False) -> np.ndarray:
    """log N(z; mu_k, tau2_k + sigma2_i) for candidates z of shape (n, C), returned with shape (n, K, C).

    Symmetric components are the equal mixture of N(mu_k, .) and N(-mu_k, .).
    """
    z = np.asarray(z, dtype=float)[:, None, :]
    var = np.asarray(tau2, dtype=float)[None, :, None] + np.asarray(sigma2, dtype=float)[:, None, None]
    mu = np.asarray(mu, dtype=float)[None, :, None]
    log_pos = gaussian_log_density(z, mu, var)
    if not symmetric:
        return log_pos
    return np.logaddexp(log_pos, gaussian_log_density(z, -mu, var)) - np.log(2.0)


def candidate_log_offset(table: CandidateTable, sigma, null: NullType, zeta: float, delta=None) -> np.ndarray:
    """b log(zeta) - log |dp/dz| for every candidate, -inf for invalid candidates."""
    sigma = np.asarray(sigma, dtype=float)[:, None]
    z = np.where(table.valid, table.z, 0.0)
    offset = table.bits * np.log(zeta) - log_p_value_slope(z, sigma, null, delta=delta)
    return np.where(table.valid, offset, -np.inf)


def blue_probability(log_weights: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Posterior probability of b = 1 from unnormalized log weights of shape (n, C) or (n, K, C)."""
    if log_weights.ndim == 3:
        log_weights = logsumexp(log_weights, axis=1)
    total = logsumexp(log_weights, axis=1)
    blue = np.where(bits == 1, log_weights, -np.inf)
    with np.errstate(divide="ignore"):
        log_blue = logsumexp(blue, axis=1)
    return np.clip(np.exp(log_blue - total), 0.0, 1.0)


class TrueModel(ABC):
    """Known generative model of the test statistics."""

    @abstractmethod
    def log_density(self, z: np.ndarray, x: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        """log f(z | x) for candidates z of shape (n, C), covariates of shape (n, d) and standard errors (n,)."""
        pass


class MixtureTruth(TrueModel):
    """Gaussian mixture prior theta | x ~ sum_k pi_k(x) N(mu_k, tau2_k) observed through z ~ N(theta, sigma^2).

        Attributes:
            mu (np.ndarray): Component locations.
            tau2 (np.ndarray): Component variances, zero for point masses.
            weights (np.ndarray or Callable): Mixing proportions of shape (K,) or a function x -> (n, K).
            symmetric (bool): Whether every component is symmetrized around zero.
    """

    def __init__(self, mu, tau2, weights: Union[np.ndarray, Callable], symmetric: bool=False):
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.tau2 = np.atleast_1d(np.asarray(tau2, dtype=float))
        self.weights = weights
        self.symmetric = symmetric

    @classmethod
    def null_only(cls) -> "MixtureTruth":
        return cls(mu=[0.0], tau2=[0.0], weights=np.array([1.0]))

    def proportions(self, x: np.ndarray) -> np.ndarray:
        if callable(self.weights):
            return np.asarray(self.weights(x), dtype=float)
        return np.tile(np.asarray(self.weights, dtype=float), (len(x), 1))

    def log_density(self, z, x, sigma):
        sigma = np.asarray(sigma, dtype=float)
        with np.errstate(divide="ignore"):
            log_pi = np.log(self.proportions(x))
        log_k = component_log_density(z, sigma ** 2, self.mu, self.tau2, self.symmetric)
        return logsumexp(log_pi[:, :, None] + log_k, axis=1)


def oracle_scores(view: AnalystView, true_model: TrueModel) -> np.ndarray:
    """Exact q_i for every hypothesis of the view (zero or one for unmasked ones)."""
    table = view.candidate_table()
    z = np.where(table.valid, table.z, 0.0)
    log_f = true_model.log_density(z, view.x, view.sigma)
    log_weights = log_f + candidate_log_offset(table, view.sigma, view.null, view.params.zeta)
    return blue_probability(log_weights, table.bits)


class OraclePolicy(RevealPolicy):
    """Reveals in descending true q_i, a fixed order computed on the first call."""

    def __init__(self, true_model: TrueModel):
        self.true_model = true_model
        self._order: Optional[np.ndarray] = None
        self._scores: Optional[np.ndarray] = None

    def reveal(self, view: AnalystView) -> RevealRequest:
        if self._order is None:
            self._scores = oracle_scores(view, self.true_model)
            masked = view.masked_indices
            self._order = rank_by_score(masked, self._scores[masked])
        remaining = self._order[view.masked[self._order]]
        return RevealRequest(indices=tuple(remaining[:view.batch_size].tolist()))

    def diagnostics(self) -> dict:
        return {"policy": "oracle", "scores": None if self._scores is None else self._scores.tolist()}


def oracle_policy(true_model: TrueModel) -> OraclePolicy:
    return OraclePolicy(true_model)
