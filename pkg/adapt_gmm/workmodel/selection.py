"""Choice of the number of components and the featurization by an information criterion.

Attributes:
    criterion_names (list[str]): Supported information criteria.
    classifier_choices (list[str]): Classifier settings accepted by default_candidates().
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from adapt_gmm.configuration import defaults
from adapt_gmm.classifier.features import FeatureKind, FeatureMap
from adapt_gmm.workmodel.data import ModelData
from adapt_gmm.workmodel.gmm import EMConfig, FitError, FitResult, fit_em


logger = logging.getLogger(__name__)

criterion_names = ["aic", "bic", "aicc"]
classifier_choices = ["intercept", "logit", "nnet", "auto"]


@dataclass(frozen=True)
class ModelCandidate:
    """One point of the model grid.

        Attributes:
            n_components (int): Number of mixture components K.
            feature_map (FeatureMap): Unfitted featurization.
            classifier (str): Classifier name, see classifier_class_lookup.
            hidden (int): Hidden nodes of a shallow network.
            score (float): Information criterion after fitting, lower is better.
            fit (FitResult): The fit the score belongs to.
    """

    n_components: int
    feature_map: FeatureMap = field(default_factory=FeatureMap)
    classifier: str = "intercept"
    hidden: int = defaults.HIDDEN_NODES
    score: Optional[float] = field(default=None, compare=False)
    fit: Optional[FitResult] = field(default=None, compare=False, repr=False)

    @property
    def label(self) -> str:
        net = f", hidden={self.hidden}" if self.classifier == "nnet" else ""
        return f"K={self.n_components}, {self.feature_map.name}, {self.classifier}{net}"

    def to_dict(self) -> dict:
        return {"label": self.label, "n_components": self.n_components, "features": self.feature_map.name,
                "classifier": self.classifier, "score": self.score}


def intercept_candidate(n_components: int=2) -> ModelCandidate:
    return ModelCandidate(n_components=n_components)


def default_candidates(classes: Sequence[int]=defaults.CLASSES,
                       spline_dfs: Sequence[int]=defaults.SPLINE_DFS,
                       classifier: str=defaults.CLASSIFIER,
                       hidden: int=defaults.HIDDEN_NODES,
                       has_covariates: bool=True) -> list:
    """Grid of K times featurizations, the intercept-only model included for every K.

    Args:
        classes (Sequence[int]): Numbers of components.
        spline_dfs (Sequence[int]): Spline degrees of freedom.
        classifier (str): One of classifier_choices; auto uses both the logit and the network on the splines.
        hidden (int): Hidden nodes of the network.
        has_covariates (bool): Without covariates only intercept-only candidates are returned.

    Returns:
        List of ModelCandidate.
    """
    if classifier not in classifier_choices:
        raise ValueError(f"Unknown classifier '{classifier}'. Expected one of {classifier_choices}.")
    kinds = {"intercept": [], "logit": ["logit"], "nnet": ["nnet"], "auto": ["logit", "nnet"]}[classifier]
    if not has_covariates:
        kinds = []

    candidates = []
    for K in classes:
        candidates.append(intercept_candidate(K))
        for df in spline_dfs:
            for kind in kinds:
                candidates.append(ModelCandidate(K, FeatureMap(FeatureKind.SPLINE, df=df), kind, hidden))
    return candidates


def count_params(fit: FitResult) -> int:
    """Classifier parameters plus a location and a variance per component."""
    return fit.params.classifier.n_params() + 2 * fit.params.n_components


def information_criterion(log_likelihood: float, n_params: int, n: int, criterion: str=defaults.CRITERION) \
        -> float:
    """AIC, BIC or AICc of a fit; lower is better.

    Args:
        log_likelihood (float): Observed-data log-likelihood.
        n_params (int): Number of free parameters.
        n (int): Number of hypotheses.
        criterion (str): One of criterion_names.

    Returns:
        The criterion, infinite for AICc when n <= n_params + 1.
    """
    if criterion == "aic":
        return 2 * n_params - 2 * log_likelihood
    if criterion == "bic":
        return np.log(n) * n_params - 2 * log_likelihood
    if criterion == "aicc":
        if n - n_params - 1 <= 0:
            return float("inf")
        return 2 * n_params - 2 * log_likelihood + 2 * n_params * (n_params + 1) / (n - n_params - 1)
    raise ValueError(f"Unknown criterion '{criterion}'. Expected one of {criterion_names}.")


def fit_candidate(data: ModelData, candidate: ModelCandidate, criterion: str=defaults.CRITERION,
                  config: Optional[EMConfig]=None) -> ModelCandidate:
    """Fits one candidate and attaches its fit and score."""
    fit = fit_em(data, candidate.n_components, candidate.feature_map, candidate.classifier, config,
                 hidden=candidate.hidden)
    score = information_criterion(fit.log_likelihood, count_params(fit), len(data), criterion)
    return replace(candidate, score=score, fit=fit)


def select_model(data: ModelData,
                 candidates: Optional[Sequence[ModelCandidate]]=None,
                 criterion: str=defaults.CRITERION,
                 config: Optional[EMConfig]=None) -> ModelCandidate:
    """Fits every candidate and returns the one with the lowest criterion.

    Ties go to the earlier candidate. Candidates whose fit fails are skipped with a warning; when all fail the
    intercept-only model with K=2 is fit as last resort.

    Args:
        data (ModelData): Masked data, typically of M_0.
        candidates (Sequence[ModelCandidate]): Model grid, default_candidates() by default. An intercept-only
            candidate is added when missing.
        criterion (str): One of criterion_names.
        config (EMConfig): EM settings.

    Returns:
        The selected ModelCandidate with its fit and score.
    """
    return _select(data, candidates, criterion, config)[0]


def score_table(data: ModelData,
                candidates: Optional[Sequence[ModelCandidate]]=None,
                criterion: str=defaults.CRITERION,
                config: Optional[EMConfig]=None) -> tuple:
    """Like select_model(), but also returns every scored candidate in grid order (score None for failures)."""
    return _select(data, candidates, criterion, config)


def _select(data, candidates, criterion, config) -> tuple:
    if criterion not in criterion_names:
        raise ValueError(f"Unknown criterion '{criterion}'. Expected one of {criterion_names}.")
    has_covariates = data.x.shape[1] > 0 and np.any(np.ptp(data.x, axis=0) > 0)
    candidates = list(default_candidates(has_covariates=has_covariates) if candidates is None else candidates)
    if not candidates:
        raise ValueError("Expected at least one model candidate.")
    if not any(c.feature_map.kind is FeatureKind.INTERCEPT for c in candidates):
        candidates.append(intercept_candidate(min(c.n_components for c in candidates)))

    scored, best = [], None
    for candidate in candidates:
        try:
            result = fit_candidate(data, candidate, criterion, config)
        except (FitError, ValueError, ArithmeticError, np.linalg.LinAlgError) as error:
            logger.warning("Fitting %s failed: %s", candidate.label, error)
            scored.append(candidate)
            continue
        logger.debug("%s: %s = %.4f", result.label, criterion, result.score)
        scored.append(replace(result, fit=None))
        if best is None or result.score < best.score:
            best = result

    if best is None:
        logger.warning("Every candidate failed, falling back to the intercept-only model with K=2.")
        best = fit_candidate(data, intercept_candidate(2), criterion, config)
    logger.info("Selected %s with %s = %.4f.", best.label, criterion, best.score)
    return best, scored
