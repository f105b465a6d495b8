import pytest
import numpy as np

from adapt_gmm.classifier.features import FeatureKind, FeatureMap, append_variance_covariate, natural_spline_columns, \
    spline_basis, spline_knots


x_train = np.random.default_rng(11).uniform(0.0, 1.0, 500)


@pytest.mark.parametrize("df", [2, 3, 4, 6])
def test_spline_basis_shape_and_rank(df):
    basis = spline_basis(x_train, df)
    assert basis.shape == (500, df), f"Expected {df} columns but found the shape {basis.shape}."
    rank = np.linalg.matrix_rank(np.column_stack([np.ones(500), basis]))
    assert rank == df + 1, f"Expected the basis with intercept to have full rank {df + 1} but found {rank}."


def test_spline_basis_is_additive_over_covariates():
    x = np.column_stack([x_train, np.random.default_rng(12).normal(size=500)])
    basis = spline_basis(x, 3)
    assert basis.shape == (500, 6), f"Expected 3 columns per covariate but found the shape {basis.shape}."


def test_spline_knots_at_quantiles():
    knots = spline_knots(np.arange(101, dtype=float), 4)
    assert np.allclose(knots, [0, 25, 50, 75, 100]), f"Expected the quartiles as knots but found {knots}."


def test_spline_span_contains_linear_functions():
    feature_map = FeatureMap(FeatureKind.SPLINE, df=4).fit(x_train)
    design = feature_map.transform(x_train)
    target = 2.0 - 3.0 * x_train
    coefficients, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = np.max(np.abs(design @ coefficients - target))
    assert residual < 1e-8, f"Expected linear functions in the span of the basis but found a residual of {residual}."


def test_spline_continues_linearly_beyond_boundary():
    feature_map = FeatureMap(FeatureKind.SPLINE, df=3).fit(x_train)
    hi = max(max(k) for k in feature_map.knots)
    outside = feature_map.transform(np.array([hi + 0.5, hi + 1.0, hi + 1.5]))
    second_difference = outside[0] - 2 * outside[1] + outside[2]
    assert np.allclose(second_difference, 0.0, atol=1e-10), \
        f"Expected a linear continuation beyond the boundary knot but found {second_difference}."
    near = feature_map.transform(np.array([hi - 1e-9, hi + 1e-9]))
    assert np.allclose(near[0], near[1], atol=1e-7), "Expected the basis to be continuous at the boundary knot."


def test_constant_covariate_contributes_no_column():
    basis = spline_basis(np.column_stack([x_train, np.full(500, 3.0)]), 3)
    assert basis.shape == (500, 3), f"Expected only the varying covariate to contribute but found {basis.shape}."


def test_feature_map_validation():
    with pytest.raises(ValueError):
        FeatureMap(FeatureKind.SPLINE, df=1)
    with pytest.raises(ValueError):
        FeatureMap(FeatureKind.SPLINE, df=4).fit(x_train[:4])
    with pytest.raises(ValueError):
        FeatureMap(FeatureKind.SPLINE, df=4).transform(x_train)


@pytest.mark.parametrize(
    "feature_map,expected_dim,expected_name",
    [(FeatureMap(), 1, "intercept"),
     (FeatureMap(FeatureKind.IDENTITY), 3, "identity"),
     (FeatureMap(FeatureKind.SPLINE, df=2), 5, "spline(df=2)")]
)
def test_feature_map_dimensions(feature_map, expected_dim, expected_name):
    x = np.random.default_rng(13).normal(size=(50, 2))
    fitted = feature_map.fit(x)
    design = fitted.transform(x)
    assert design.shape == (50, expected_dim), f"Expected {expected_dim} columns but found {design.shape}."
    assert np.all(design[:, 0] == 1.0), "Expected a leading constant column."
    assert fitted.name == expected_name, f"Expected the name {expected_name} but found {fitted.name}."


def test_append_variance_covariate():
    x = np.zeros((4, 1))
    same = append_variance_covariate(x, np.ones(4))
    assert same.shape == (4, 1), "Expected equal standard errors to add no covariate."
    extended = append_variance_covariate(x, np.array([1.0, 2.0, 1.0, 3.0]))
    assert np.allclose(extended[:, 1], [1.0, 4.0, 1.0, 9.0]), \
        f"Expected sigma^2 as additional covariate but found {extended[:, 1]}."


def test_spline_is_twice_continuously_differentiable():
    knots = np.array([0.0, 1.0, 2.5, 4.0])
    h = 1e-4

    def _basis(x):
        return natural_spline_columns(np.atleast_1d(np.asarray(x, dtype=float)), knots)[0]

    for knot in knots:
        left_slope = (_basis(knot) - _basis(knot - 1e-6)) / 1e-6
        right_slope = (_basis(knot + 1e-6) - _basis(knot)) / 1e-6
        assert np.allclose(left_slope, right_slope, atol=1e-4), \
            f"Expected a continuous first derivative at {knot} but found {left_slope} and {right_slope}."
        left_curvature = (_basis(knot) - 2 * _basis(knot - h) + _basis(knot - 2 * h)) / h ** 2
        right_curvature = (_basis(knot + 2 * h) - 2 * _basis(knot + h) + _basis(knot)) / h ** 2
        assert np.allclose(left_curvature, right_curvature, atol=1e-2), \
            f"Expected a continuous second derivative at {knot} but found {left_curvature} and {right_curvature}."

    for x in [-2.0, -0.5, 4.5, 7.0]:
        curvature = (_basis(x + 1e-3) - 2 * _basis(x) + _basis(x - 1e-3)) / 1e-6
        assert np.allclose(curvature, 0.0, atol=1e-6), \
            f"Expected a vanishing second derivative beyond the boundary at {x} but found {curvature}."
