"""Reveal policy driven by the conditional Gaussian mixture working model.
"""

import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from adapt_gmm.configuration import defaults
from adapt_gmm.engine.policies import AnalystView, RevealPolicy, RevealRequest, rank_by_score
from adapt_gmm.workmodel.data import build_model_data
from adapt_gmm.workmodel.gmm import EMConfig, FitError, GmmParams, fit_em, q_scores
from adapt_gmm.workmodel.selection import ModelCandidate, default_candidates, score_table


logger = logging.getLogger(__name__)


class GmmRevealPolicy(RevealPolicy):
    """Reveals the masked hypotheses the working model deems most likely blue.

    The model is selected once on the data of the first call and refit with a warm start on every later call. When a
    fit fails the policy falls back to revealing in index order and says so in the request note.

        Attributes:
            candidates (list[ModelCandidate]): Model grid, default_candidates() when None.
            criterion (str): Information criterion of the model selection.
            config (EMConfig): EM settings.
            symmetric (bool): Symmetric components, by default on for point nulls with known z-values.
            standardize (bool): Whether the model works with z / sigma.
    """

    def __init__(self,
                 candidates: Optional[Sequence[ModelCandidate]]=None,
                 criterion: str=defaults.CRITERION,
                 classifier: str=defaults.CLASSIFIER,
                 hidden: int=defaults.HIDDEN_NODES,
                 config: Optional[EMConfig]=None,
                 symmetric: Optional[bool]=None,
                 standardize: bool=True):
        self.candidates = None if candidates is None else list(candidates)
        self.criterion = criterion
        self.classifier = classifier
        self.hidden = hidden
        self.config = EMConfig() if config is None else config
        self.symmetric = symmetric
        self.standardize = standardize

        self.selected: Optional[ModelCandidate] = None
        self.params: Optional[GmmParams] = None
        self._scored = []
        self._fits = []
        self._fallbacks = []

    def _config_for(self, view: AnalystView) -> EMConfig:
        symmetric = view.null.is_point if self.symmetric is None else self.symmetric
        return replace(self.config, symmetric=symmetric)

    def _fit(self, view: AnalystView):
        data = build_model_data(view, self.standardize)
        config = self._config_for(view)
        if self.selected is None:
            candidates = self.candidates
            if candidates is None:
                has_covariates = data.x.shape[1] > 0 and bool(np.any(np.ptp(data.x, axis=0) > 0))
                candidates = default_candidates(classifier=self.classifier, hidden=self.hidden,
                                                has_covariates=has_covariates)
            self.selected, self._scored = score_table(data, candidates, self.criterion, config)
            fit = self.selected.fit
        else:
            fit = fit_em(data, self.params.n_components, self.selected.feature_map, self.selected.classifier,
                         config, init=self.params, hidden=self.selected.hidden)
        self.params = fit.params
        self._fits.append({"step": view.step, "iterations": fit.iterations, "converged": fit.converged,
                           "log_likelihood": fit.log_likelihood, "objective_path": list(fit.objective_path),
                           "flags": list(fit.flags)})
        return data, fit

    def reveal(self, view: AnalystView) -> RevealRequest:
        try:
            data, fit = self._fit(view)
            scores = q_scores(data, fit.params)
        except (FitError, ValueError, ArithmeticError, np.linalg.LinAlgError) as error:
            logger.warning("Working model fit failed at step %d (%s), revealing in index order.", view.step, error)
            self._fallbacks.append({"step": view.step, "error": str(error)})
            return RevealRequest(indices=tuple(view.masked_indices[:view.batch_size].tolist()),
                                 note=f"fit failed: {error}; index order")
        order = rank_by_score(scores.index.to_numpy(), scores.to_numpy())
        return RevealRequest(indices=tuple(order[:view.batch_size].tolist()))

    def diagnostics(self) -> dict:
        return {
            "policy": "adapt-gmm",
            "criterion": self.criterion,
            "selected": None if self.selected is None else self.selected.to_dict(),
            "candidates": [candidate.to_dict() for candidate in self._scored],
            "fits": self._fits,
            "fallbacks": self._fallbacks,
            "final_params": None if self.params is None else self.params.to_dict(),
        }


def gmm_policy(**kwargs) -> GmmRevealPolicy:
    return GmmRevealPolicy(**kwargs)
