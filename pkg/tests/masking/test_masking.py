import pytest
import numpy as np

from adapt_gmm.masking.masking import MaskedValue, MaskingParams, Shape, default_params, mask, mask_array, \
    r_min, symmetric_params, unmask_candidates


worked_params = MaskingParams(alpha_m=0.2, lam=0.3, nu=0.9, shape=Shape.TENT)


@pytest.mark.parametrize(
    "n,expected_zeta,expected_alpha_m,expected_r_min",
    [(100, 20.0, 0.9 / 21, 1),
     (300, 20.0, 0.9 / 21, 1),
     (1000, 6.0, 0.9 / 7, 4),
     (3000, 2.0, 0.3, 10)]
)
def test_default_params_table(n, expected_zeta, expected_alpha_m, expected_r_min):
    params = default_params(n, 0.05)
    assert params.zeta == pytest.approx(expected_zeta, rel=1e-12), \
        f"Expected zeta={expected_zeta} for n={n} but found {params.zeta}."
    assert params.alpha_m == pytest.approx(expected_alpha_m, rel=1e-12), \
        f"Expected alpha_m={expected_alpha_m} for n={n} but found {params.alpha_m}."
    assert params.lam == params.alpha_m and params.nu == 0.9, \
        f"Expected lambda=alpha_m and nu=0.9 but found {params}."
    assert r_min(params, 0.05) == expected_r_min, \
        f"Expected R_min={expected_r_min} for n={n} but found {r_min(params, 0.05)}."


def test_default_params_nu_override():
    params = default_params(1000, 0.1, nu_override=0.8)
    assert params.nu == 0.8, f"Expected nu=0.8 but found {params.nu}."
    assert params.alpha_m == pytest.approx(0.8 / (params.zeta + 1)), \
        f"Expected alpha_m=nu/(zeta+1) but found {params.alpha_m}."


@pytest.mark.parametrize("n,alpha", [(0, 0.1), (10, 0.0), (10, 1.0)])
def test_default_params_rejects_invalid_input(n, alpha):
    with pytest.raises(ValueError):
        default_params(n, alpha)


@pytest.mark.parametrize(
    "alpha_m,lam,nu",
    [(0.0, 0.3, 0.9),
     (0.4, 0.3, 0.9),
     (0.2, 0.9, 0.9),
     (0.2, 0.3, 1.1)]
)
def test_masking_params_validation(alpha_m, lam, nu):
    with pytest.raises(ValueError):
        MaskingParams(alpha_m=alpha_m, lam=lam, nu=nu)


def test_zeta_and_region_measure():
    assert worked_params.zeta == pytest.approx(3.0), f"Expected zeta=3 but found {worked_params.zeta}."
    measure = worked_params.nu - worked_params.lam
    assert measure == pytest.approx(worked_params.zeta * worked_params.alpha_m, abs=1e-15), \
        f"Expected the blue region to have length zeta * alpha_m but found {measure}."
    assert symmetric_params().zeta == 1.0, f"Expected zeta=1 for the symmetric case but found {symmetric_params().zeta}."


@pytest.mark.parametrize(
    "p,params,expected_m,expected_maskable",
    [(0.87, worked_params, 0.01, True),
     (0.01, worked_params, 0.01, True),
     (0.25, worked_params, 0.25, False),
     (0.95, worked_params, 0.95, False),
     (0.7, symmetric_params(), 0.3, True),
     (0.33, MaskingParams(0.2, 0.3, 0.9, Shape.COMB), 0.01, True)]
)
def test_mask_examples(p, params, expected_m, expected_maskable):
    result = mask(p, params)
    assert result.m == pytest.approx(expected_m, abs=1e-12), \
        f"Expected m={expected_m} for p={p} but found {result.m}."
    assert result.is_maskable == expected_maskable, \
        f"Expected maskable={expected_maskable} for p={p} but found {result.is_maskable}."


@pytest.mark.parametrize("p", [-0.1, 1.2, float("nan")])
def test_mask_rejects_invalid_p(p):
    with pytest.raises(ValueError):
        mask(p, worked_params)


def test_unmask_worked_example():
    candidates = unmask_candidates(MaskedValue(0.01, True), worked_params)
    expected = [(0, 0.01), (1, 0.87)]
    assert [b for b, _ in candidates] == [0, 1], f"Expected the bits [0, 1] but found {candidates}."
    assert np.allclose([p for _, p in candidates], [p for _, p in expected], atol=1e-12), \
        f"Expected {expected} but found {candidates}."


def test_unmask_comb_example():
    params = MaskingParams(0.2, 0.3, 0.9, Shape.COMB)
    candidates = unmask_candidates(MaskedValue(0.01, True), params)
    assert candidates[1][0] == 1 and candidates[1][1] == pytest.approx(0.33, abs=1e-12), \
        f"Expected the blue candidate (1, 0.33) but found {candidates}."


def test_unmask_not_maskable():
    candidates = unmask_candidates(MaskedValue(0.95, False), worked_params)
    assert candidates == [(0, 0.95)], f"Expected [(0, 0.95)] but found {candidates}."


@pytest.mark.parametrize("shape", [Shape.TENT, Shape.COMB])
@pytest.mark.parametrize(
    "alpha_m,lam,nu",
    [(0.2, 0.3, 0.9), (0.05, 0.05, 0.9), (0.5, 0.5, 1.0), (0.1, 0.6, 0.7)]
)
def test_round_trip(shape, alpha_m, lam, nu):
    params = MaskingParams(alpha_m, lam, nu, shape)
    p = np.random.default_rng(1).random(2000)
    m, maskable, _ = mask_array(p, params)
    for p_i, m_i, maskable_i in zip(p, m, maskable):
        candidates = unmask_candidates(MaskedValue(float(m_i), bool(maskable_i)), params)
        found = [c for _, c in candidates]
        assert np.min(np.abs(np.array(found) - p_i)) <= 1e-12, \
            f"Expected p={p_i} among the candidates {candidates}."
        for _, candidate in candidates:
            remasked = mask(candidate, params).m
            assert abs(remasked - m_i) <= 1e-12, \
                f"Expected candidate {candidate} to re-mask to {m_i} but found {remasked}."


def test_uniform_null_bit_law():
    p = np.random.default_rng(2).random(100000)
    _, maskable, bits = mask_array(p, worked_params)
    blue = bits[maskable]
    zeta = worked_params.zeta
    expected = zeta / (1 + zeta)
    se = np.sqrt(expected * (1 - expected) / len(blue))
    assert abs(np.mean(blue) - expected) <= 3 * se, \
        f"Expected a blue share of {expected} +/- {3 * se} but found {np.mean(blue)}."
