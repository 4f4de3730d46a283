import math

import numpy as np
import pytest

from gapgrad import (
    InputError,
    UnsupportedDimensionError,
    WeightSpec,
    alpha_of_lambda,
    alpha_pm,
    beta_of_lambda,
    predict_rates,
    shortcut_lambda1,
)
from gapgrad.exponents import weight_is_constant


class TestAlpha:
    def test_reference_value(self):
        assert alpha_of_lambda(1.0, 3, 2.0) == pytest.approx(
            math.sqrt(2.0) - 1.0, abs=1e-15
        )

    def test_zero_eigenvalue_gives_constant_mode(self):
        assert alpha_of_lambda(0.0, 3, 2.0) == 0.0
        assert alpha_of_lambda(0.0, 5, 4.0) == 0.0

    def test_defining_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            lam = float(rng.uniform(0.0, 20.0))
            d = int(rng.integers(3, 7))
            m = float(rng.uniform(2.0, 6.0))
            a = alpha_of_lambda(lam, d, m)
            assert a * (a + d + m - 3.0) == pytest.approx(lam, rel=1e-12, abs=1e-12)

    def test_monotone_in_lambda(self):
        lams = np.linspace(0.0, 5.0, 30)
        alphas = [alpha_of_lambda(v, 3, 4.0) for v in lams]
        assert all(b > a for a, b in zip(alphas, alphas[1:]))

    def test_negative_lambda_rejected(self):
        with pytest.raises(InputError):
            alpha_of_lambda(-0.1, 3, 2.0)

    def test_branch_pair(self):
        lam, d, m = 1.3, 3, 4.0
        lo, hi = alpha_pm(lam, d, m)
        assert lo < 0 < hi
        assert lo * hi == pytest.approx(-lam, rel=1e-12)
        assert lo + hi == pytest.approx(-(d + m - 3.0), rel=1e-12)


class TestBeta:
    def test_flat_side_branch(self):
        # m=4, d=3, lambda=1: threshold d+2a-3 = 2(sqrt(5)-2) ~ 0.47 < m
        beta, case = beta_of_lambda(1.0, 3, 4.0)
        assert case == "m_greater"
        alpha = alpha_of_lambda(1.0, 3, 4.0)
        assert beta == pytest.approx((2 * alpha + 4.0) / 8.0, rel=1e-12)

    def test_round_side_branch(self):
        # large lambda pushes the threshold above m
        beta, case = beta_of_lambda(12.0, 3, 2.0)
        assert case == "m_less"
        assert beta == 1.0

    def test_borderline_branch(self):
        # for d=3, alpha = m/2 puts the threshold d + 2 alpha - 3 at m
        # exactly, for any m; pick lam so alpha(lam) = m/2
        d, m = 3, 2.74
        lam = (m / 2.0) * (m / 2.0 + d + m - 3.0)
        beta, case = beta_of_lambda(lam, d, m)
        assert case == "m_equal"
        assert beta == pytest.approx(1.0 - 1e-6, rel=1e-12)

    def test_custom_eta(self):
        d, m = 3, 2.74
        lam = (m / 2.0) * (m / 2.0 + d + m - 3.0)
        beta, _ = beta_of_lambda(lam, d, m, eta=1e-3)
        assert beta == pytest.approx(1.0 - 1e-3, rel=1e-12)
        with pytest.raises(InputError):
            beta_of_lambda(lam, d, m, eta=2.0)


class TestShortcutTable:
    def test_constant_quadratic_configurations(self, ones_weight):
        assert shortcut_lambda1(ones_weight) == 1.0
        pure_a = WeightSpec(d=4, m=2.0, kappa0=3.0, kappa=(2.0, 2.0, 2.0),
                            set_a={1, 2, 3})
        assert shortcut_lambda1(pure_a) == 2.0

    def test_flat_weight_rows_reproduce_published_value(self, cube_weight):
        # the m>2 nonempty-B row; the eigensolver disagrees with this
        # value for genuinely nonconstant weights (see test_spectral)
        assert shortcut_lambda1(cube_weight) == 1.0

    def test_unequal_quadratic_family_no_entry(self, aniso_weight):
        assert shortcut_lambda1(aniso_weight) is None

    def test_constant_weight_backstop(self):
        # A-only with equal coefficients is constant on the sphere for
        # any m, so the table applies through the sampled backstop
        spec = WeightSpec(d=3, m=4.0, kappa0=2.0, kappa=(1.5, 1.5),
                          set_a={1, 2})
        assert weight_is_constant(spec)
        assert shortcut_lambda1(spec) == 1.0

    def test_weight_is_constant_detects_variation(self, cube_weight):
        assert not weight_is_constant(cube_weight)


class TestPredictRates:
    def test_shortcut_route(self, ones_weight):
        rep = predict_rates(ones_weight)
        assert rep.lambda1_source == "shortcut_table"
        assert rep.lambda1 == 1.0
        assert rep.alpha == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-15)
        assert rep.gradient_exponent_touching == pytest.approx(rep.alpha - 1.0)
        assert rep.gradient_exponent_eps == pytest.approx(
            (math.sqrt(2.0) - 2.0) / 2.0, abs=1e-15
        )

    def test_computed_route(self, cube_weight):
        rep = predict_rates(cube_weight, use_shortcut=False, n=512)
        assert rep.lambda1_source == "computed"
        assert rep.lambda1 == pytest.approx(0.925626666919246, abs=1e-9)

    def test_override_route(self, cube_weight):
        rep = predict_rates(cube_weight, lambda1_override=2.0)
        assert rep.lambda1_source == "computed"
        assert rep.lambda1 == 2.0
        with pytest.raises(InputError):
            predict_rates(cube_weight, lambda1_override=-1.0)

    def test_high_dimension_needs_override(self):
        spec = WeightSpec(d=4, m=2.0, kappa0=1.0, kappa=(1.0, 2.0, 3.0),
                          set_b={1, 2, 3})
        with pytest.raises(UnsupportedDimensionError):
            predict_rates(spec, use_shortcut=False)
        rep = predict_rates(spec, lambda1_override=1.7)
        assert rep.alpha == alpha_of_lambda(1.7, 4, 2.0)

    def test_report_dict_round_trip(self, ones_weight):
        data = predict_rates(ones_weight).to_dict()
        assert data["beta_case"] in ("m_greater", "m_equal", "m_less")
        assert set(data) >= {"d", "m", "lambda1", "alpha", "beta",
                             "gradient_exponent_eps", "lambda1_source"}
