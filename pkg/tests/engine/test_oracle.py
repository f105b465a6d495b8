import pytest
import numpy as np

from adapt_gmm.engine.engine import initial_view, run
from adapt_gmm.engine.oracle import MixtureTruth, OraclePolicy, blue_probability, component_log_density, \
    oracle_policy, oracle_scores
from adapt_gmm.masking.hypotheses import HypothesisTable, NullType
from adapt_gmm.masking.masking import MaskingParams, default_params


worked_params = MaskingParams(alpha_m=0.2, lam=0.3, nu=0.9)


@pytest.mark.parametrize(
    "table",
    [HypothesisTable.from_arrays(p=np.random.default_rng(6).random(300)),
     HypothesisTable.from_arrays(z=np.random.default_rng(7).normal(size=300), null=NullType.point())]
)
def test_null_only_scores_equal_prior_bit_law(table):
    view = initial_view(table, worked_params)
    scores = oracle_scores(view, MixtureTruth.null_only())
    masked = view.masked_indices
    assert np.allclose(scores[masked], 0.75, atol=1e-10), \
        f"Expected q=zeta/(1+zeta)=0.75 for every masked hypothesis but found {np.unique(scores[masked])}."


def test_blue_probability_from_log_weights():
    log_weights = np.log(np.array([[1.0, 3.0], [2.0, 2.0]]))
    bits = np.array([[0, 1], [0, 1]])
    result = blue_probability(log_weights, bits)
    assert np.allclose(result, [0.75, 0.5]), f"Expected [0.75, 0.5] but found {result}."


def test_symmetric_component_density_is_even():
    z = np.array([[-2.0, 1.5], [0.3, -0.3]])
    sigma2 = np.ones(2)
    left = component_log_density(z, sigma2, [1.5], [0.5], symmetric=True)
    right = component_log_density(-z, sigma2, [1.5], [0.5], symmetric=True)
    assert np.allclose(left, right), f"Expected f(z) = f(-z) for symmetric components but found {left}, {right}."


def test_mixture_truth_with_covariate_proportions():
    def _weights(x):
        share = np.clip(np.asarray(x)[:, 0], 0.0, 1.0)
        return np.column_stack([1 - share, share])

    truth = MixtureTruth(mu=[0.0, 3.0], tau2=[0.0, 1.0], weights=_weights)
    z = np.array([[3.0], [3.0]])
    x = np.array([[0.0], [1.0]])
    log_f = truth.log_density(z, x, np.ones(2))
    null_only = component_log_density(z, np.ones(2), [0.0], [0.0])[:, 0, :]
    assert np.allclose(log_f[0], null_only[0]), "Expected x=0 to give the null density."
    assert log_f[1, 0] > log_f[0, 0], "Expected the signal component to raise the density at z=3."


def test_oracle_policy_reveals_in_descending_q():
    rng = np.random.default_rng(8)
    n = 400
    x = rng.random(n)
    signal = rng.random(n) < x
    z = np.where(signal, rng.normal(3.0, 1.0, n), rng.normal(0.0, 1.0, n))
    table = HypothesisTable.from_arrays(z=z, x=x)
    truth = MixtureTruth(mu=[0.0, 3.0], tau2=[0.0, 0.0], weights=lambda v: np.column_stack([1 - v[:, 0], v[:, 0]]))
    params = default_params(n, 0.1)

    policy = oracle_policy(truth)
    view = initial_view(table, params, batch_size=5)
    request = policy.reveal(view)
    scores = np.asarray(policy.diagnostics()["scores"])
    masked = view.masked_indices
    best = masked[np.argsort(-scores[masked], kind="stable")][:5]
    assert np.allclose(np.sort(scores[list(request.indices)]), np.sort(scores[best])), \
        f"Expected the five largest q among the masked hypotheses but found {request.indices}."
    assert np.all(np.diff(scores[list(request.indices)]) <= 0), "Expected the batch in descending q."

    result = run(table, params, 0.1, OraclePolicy(truth))
    order_scores = scores[list(result.reveal_order)]
    assert np.all(np.diff(order_scores) <= 1e-15), "Expected the whole run to reveal in descending q."
