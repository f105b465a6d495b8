import pytest
import numpy as np

from adapt_gmm.classifier.features import FeatureKind, FeatureMap
from adapt_gmm.classifier.models import ClassifierConfig, InterceptOnlyClassifier, MultinomialLogitClassifier, \
    ShallowNetClassifier, Standardizer, class_probabilities, fit_multinomial_logit, fit_shallow_net, \
    make_classifier, shallow_net_n_params, shallow_net_objective


def soft_labels(n: int, n_classes: int, seed: int) -> np.ndarray:
    weights = np.random.default_rng(seed).random((n, n_classes))
    return weights / weights.sum(axis=1, keepdims=True)


def logistic_data(n: int=600, seed: int=21) -> tuple:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    share = 1.0 / (1.0 + np.exp(-2.0 * x))
    weights = np.column_stack([share, 1.0 - share])
    return FeatureMap(FeatureKind.IDENTITY).transform(x), weights


def test_class_probabilities_sum_to_one():
    scores = np.random.default_rng(20).normal(scale=30.0, size=(100, 4))
    result = class_probabilities(scores)
    assert np.allclose(result.sum(axis=1), 1.0), "Expected every row to sum to one."
    assert np.all(result >= 0), "Expected nonnegative probabilities."


def test_intercept_only_fits_weighted_frequencies():
    weights = soft_labels(200, 3, 22)
    model = InterceptOnlyClassifier(3).fit(np.ones((200, 1)), weights)
    expected = weights.sum(axis=0) / weights.sum()
    assert np.allclose(model.proportions, expected), f"Expected {expected} but found {model.proportions}."
    assert model.n_params() == 2, f"Expected K - 1 = 2 parameters but found {model.n_params()}."


def test_logit_with_constant_feature_matches_frequencies():
    weights = soft_labels(300, 3, 23)
    model = fit_multinomial_logit(np.ones((300, 1)), weights)
    expected = weights.sum(axis=0) / weights.sum()
    result = model.predict_proba(np.ones((1, 1)))[0]
    assert np.allclose(result, expected, atol=1e-5), \
        f"Expected the unpenalized intercept to reproduce the class frequencies {expected} but found {result}."


def test_logit_recovers_the_direction():
    features, weights = logistic_data()
    model = fit_multinomial_logit(features, weights, ClassifierConfig(ridge=0.0))
    probabilities = model.predict_proba(np.array([[1.0, -2.0], [1.0, 0.0], [1.0, 2.0]]))
    assert np.allclose(probabilities.sum(axis=1), 1.0), "Expected every row to sum to one."
    assert np.allclose(probabilities[:, 0], 1.0 / (1.0 + np.exp(-2.0 * np.array([-2.0, 0.0, 2.0]))), atol=1e-3), \
        f"Expected the logistic curve to be recovered but found {probabilities[:, 0]}."


def test_logit_improves_on_intercept_and_warm_start():
    features, weights = logistic_data()
    intercept = InterceptOnlyClassifier(2).fit(features, weights)
    model = fit_multinomial_logit(features, weights)
    assert model.objective(features, weights) > intercept.log_likelihood(features, weights), \
        "Expected the covariates to improve the fit."
    warm = fit_multinomial_logit(features, weights, warm_start=model)
    assert warm.objective(features, weights) >= model.objective(features, weights) - 1e-8, \
        "Expected a warm start not to lower the objective."


def test_logit_drops_collinear_columns():
    x = np.random.default_rng(24).normal(size=100)
    features = np.column_stack([np.ones(100), x, 2.0 * x])
    model = fit_multinomial_logit(features, soft_labels(100, 3, 25))
    assert len(model.kept) == 2, f"Expected one collinear column to be dropped but found {model.kept}."
    assert model.n_params() == 4, f"Expected 2 * (K - 1) = 4 parameters but found {model.n_params()}."


def test_logit_validation():
    with pytest.raises(ValueError):
        fit_multinomial_logit(np.ones((10, 1)), -np.ones((10, 2)))
    with pytest.raises(ValueError):
        MultinomialLogitClassifier(3).fit(np.ones((10, 1)), soft_labels(10, 2, 26))


def test_shallow_net_gradient_matches_finite_differences():
    rng = np.random.default_rng(27)
    design = np.column_stack([np.ones(40), rng.normal(size=(40, 2))])
    weights = soft_labels(40, 3, 28)
    w1, w2 = rng.normal(size=(3, 2)), rng.normal(size=(2, 2))
    penalized = np.array([False, True, True])
    _, g1, g2 = shallow_net_objective(w1, w2, design, weights, 0.01, penalized)

    h = 1e-6
    for w, gradient, first in [(w1, g1, True), (w2, g2, False)]:
        numeric = np.zeros_like(w)
        for index in np.ndindex(w.shape):
            up, down = w.copy(), w.copy()
            up[index] += h
            down[index] -= h
            args_up = (up, w2) if first else (w1, up)
            args_down = (down, w2) if first else (w1, down)
            numeric[index] = (shallow_net_objective(*args_up, design, weights, 0.01, penalized)[0]
                              - shallow_net_objective(*args_down, design, weights, 0.01, penalized)[0]) / (2 * h)
        assert np.allclose(gradient, numeric, rtol=1e-5, atol=1e-6), \
            f"Expected the gradient {numeric} but found {gradient}."


def test_shallow_net_with_zero_output_weights_is_uniform():
    features = np.column_stack([np.ones(20), np.arange(20.0)])
    model = ShallowNetClassifier(4, w1=np.ones((2, 2)), w2=np.zeros((2, 3)), standardizer=Standardizer.fit(features))
    result = model.predict_proba(features)
    assert np.allclose(result, 0.25), f"Expected uniform probabilities but found {result[0]}."


def test_shallow_net_beats_logit_on_xor():
    rng = np.random.default_rng(29)
    corners = rng.choice([-1.0, 1.0], size=(400, 2))
    x = corners + rng.normal(scale=0.2, size=(400, 2))
    label = (corners[:, 0] * corners[:, 1] > 0).astype(float)
    weights = np.column_stack([label, 1.0 - label])
    features = FeatureMap(FeatureKind.IDENTITY).transform(x)

    logit = fit_multinomial_logit(features, weights)
    net = fit_shallow_net(features, weights, hidden=4)
    gain = (net.log_likelihood(features, weights) - logit.log_likelihood(features, weights)) / len(x)
    assert gain > 0.05, f"Expected the network to capture the interaction but found a gain of {gain} per hypothesis."


def test_shallow_net_is_deterministic_and_monotone():
    features, weights = logistic_data(200, 30)
    first = fit_shallow_net(features, soft_labels(200, 3, 31))
    second = fit_shallow_net(features, soft_labels(200, 3, 31))
    assert np.array_equal(first.w1, second.w1) and np.array_equal(first.w2, second.w2), \
        "Expected equal fits for equal seeds."
    assert np.all(np.diff(first.history) >= 0), "Expected the objective never to decrease during training."
    assert first.n_params() == shallow_net_n_params(2, 3, 2) == 8, \
        f"Expected (d + K - 1) h = 8 parameters but found {first.n_params()}."


@pytest.mark.parametrize("d,n_classes,hidden,expected", [(3, 3, 2, 10), (1, 2, 5, 10), (6, 5, 3, 30)])
def test_shallow_net_n_params(d, n_classes, hidden, expected):
    result = shallow_net_n_params(d, n_classes, hidden)
    assert result == expected, f"Expected {expected} parameters but found {result}."


def test_make_classifier():
    assert isinstance(make_classifier("logit", 3), MultinomialLogitClassifier), "Expected a multinomial logit."
    assert isinstance(make_classifier("nnet", 3, hidden=3), ShallowNetClassifier), "Expected a shallow network."
    assert isinstance(make_classifier("nnet", 1), InterceptOnlyClassifier), "Expected K = 1 to need no classifier."
    with pytest.raises(ValueError):
        make_classifier("forest", 2)


def test_logit_on_separable_data_stays_finite():
    rng = np.random.default_rng(27)
    x = np.concatenate([-np.linspace(0.5, 1.0, 10), np.linspace(0.5, 1.0, 10)])
    labels = np.repeat([0, 1], 10)
    weights = np.eye(2)[labels] * rng.uniform(0.5, 2.0, 20)[:, None]
    features = FeatureMap(FeatureKind.IDENTITY).transform(x)

    model = fit_multinomial_logit(features, weights, ClassifierConfig(ridge=1e-4))
    probabilities = model.predict_proba(features)
    assert np.all(np.isfinite(model.beta)), f"Expected finite coefficients but found {model.beta}."
    assert np.all((probabilities > 0) & (probabilities < 1)), \
        f"Expected probabilities strictly inside (0, 1) but found {probabilities[[0, -1]]}."
    assert np.all(probabilities[np.arange(20), labels] > 0.5), "Expected every point on the side of its class."
    refit = fit_multinomial_logit(features, weights, ClassifierConfig(ridge=1e-4), warm_start=model)
    assert refit.objective(features, weights) == pytest.approx(model.objective(features, weights), abs=1e-6), \
        "Expected the ridge penalty to give a stationary optimum."


def test_class_probabilities_ignore_a_common_shift():
    rng = np.random.default_rng(28)
    scores = rng.normal(scale=5.0, size=(50, 3))
    shift = rng.uniform(-1e3, 1e3, size=(50, 1))
    shifted = class_probabilities(scores + shift)
    assert np.all(np.isfinite(shifted)), "Expected large shifts not to overflow."
    assert np.allclose(shifted, class_probabilities(scores), atol=1e-12), \
        "Expected the probabilities not to change when a constant is added to every class score."
