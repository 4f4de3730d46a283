import math

import numpy as np
import pytest

from gapgrad import (
    InputError,
    QuadratureError,
    alpha_of_lambda,
    fit_leading_coefficient,
    homogeneous_radial,
    solve_radial_ivp,
    variation_of_parameters,
)
from gapgrad.radial import apply_radial_operator, save_radial_csv


class TestHomogeneous:
    def test_power_law(self):
        a = alpha_of_lambda(1.0, 3, 2.0)
        rho = np.array([0.1, 0.5, 1.0])
        assert np.allclose(homogeneous_radial(1.0, 3, 2.0, rho), rho**a)

    def test_zero_mode_is_constant(self):
        rho = np.array([0.01, 0.3, 1.0])
        assert np.allclose(homogeneous_radial(0.0, 3, 4.0, rho), 1.0)

    def test_scalar_in_scalar_out(self):
        v = homogeneous_radial(1.0, 3, 2.0, 0.5)
        assert isinstance(v, float)

    def test_domain_check(self):
        with pytest.raises(InputError):
            homogeneous_radial(1.0, 3, 2.0, 0.0)


class TestRK4:
    def test_tracks_closed_form(self):
        sol = solve_radial_ivp(1.0, 3, 2.0, r_end=0.01, steps=20000)
        a = alpha_of_lambda(1.0, 3, 2.0)
        rel = np.max(np.abs(sol.values - sol.r_grid**a) / sol.r_grid**a)
        assert rel <= 1e-7
        assert sol.source == "rk4"

    def test_exponent_identified_near_origin(self):
        sol = solve_radial_ivp(1.0, 3, 4.0, r_end=0.02, steps=20000)
        a = alpha_of_lambda(1.0, 3, 4.0)
        assert sol.closed_form_exponent == pytest.approx(a, abs=1e-3)

    def test_negative_branch_detected(self):
        # seeding the slope off the admissible ray mixes in the negative
        # root, which dominates near the origin
        sol = solve_radial_ivp(1.0, 3, 2.0, r_end=0.05, steps=20000, dv1=-1.0)
        lo, _ = __import__("gapgrad").alpha_pm(1.0, 3, 2.0)
        assert sol.closed_form_exponent == pytest.approx(lo, abs=0.05)

    def test_validation(self):
        with pytest.raises(InputError):
            solve_radial_ivp(1.0, 3, 2.0, r_end=1.5)
        with pytest.raises(InputError):
            solve_radial_ivp(1.0, 3, 2.0, r_end=0.1, steps=10)


class TestVariationOfParameters:
    def test_analytic_power_forcing(self):
        # H = t^{gamma+alpha-2} has the closed-form factored solution
        # w = r^gamma / (gamma (d + m + 2 alpha + gamma - 3)); the
        # unfactored particular solution carries the extra r^alpha
        d, m, gamma = 3, 2.0, 0.9
        lam = 1.0
        a = alpha_of_lambda(lam, d, m)
        r = np.geomspace(0.01, 1.0, 40)
        res = variation_of_parameters(
            lambda t: t ** (gamma + a - 2.0), a, d, m, r
        )
        denom = gamma * (d + m + 2 * a + gamma - 3.0)
        expect_w = r**gamma / denom
        assert np.max(np.abs(res.w.values - expect_w) / expect_w) <= 1e-8
        expect_v = r ** (gamma + a) / denom
        assert np.max(np.abs(res.v.values - expect_v) / expect_v) <= 1e-8

    def test_zero_forcing_gives_zero(self):
        r = np.geomspace(0.05, 1.0, 20)
        res = variation_of_parameters(lambda t: np.zeros_like(t), 0.414, 3,
                                      2.0, r)
        assert np.max(np.abs(res.w.values)) == 0.0

    def test_divergent_forcing_flagged(self):
        a = alpha_of_lambda(1.0, 3, 2.0)
        r = np.geomspace(0.05, 1.0, 10)
        with pytest.raises(QuadratureError):
            variation_of_parameters(lambda t: t ** (-a - 3.0), a, 3, 2.0, r)

    def test_grid_validation(self):
        with pytest.raises(InputError):
            variation_of_parameters(lambda t: t, 0.4, 3, 2.0, [0.5, 0.2])
        with pytest.raises(InputError):
            variation_of_parameters(lambda t: t, 0.4, 3, 2.0, [])


class TestOperatorResidual:
    def test_closed_form_annihilated(self):
        # r^alpha is in the kernel of the radial operator, so the stencil
        # residual is pure truncation error and must shrink ~4x per doubling.
        lam, d, m = 1.0, 3, 4.0
        a = alpha_of_lambda(lam, d, m)
        maxima = []
        for n in (400, 800):
            r = np.geomspace(0.05, 0.9, n)
            _, lv = apply_radial_operator(r**a, r, lam, d, m)
            maxima.append(float(np.max(np.abs(lv))))
        assert maxima[0] <= 1e-2
        ratio = maxima[0] / maxima[1]
        assert 3.0 <= ratio <= 5.0


class TestLeadingCoefficientFit:
    def test_two_term_model_recovered(self):
        a, gamma = 0.5, 0.9
        r = np.geomspace(0.02, 0.5, 60)
        u = 2.0 * r**a + 0.5 * r ** (a + gamma)
        c1, rexp, diag = fit_leading_coefficient((r, u), a, gamma)
        assert c1 == pytest.approx(2.0, rel=1e-8)
        assert rexp == pytest.approx(a + gamma, abs=0.02)
        assert diag.c2 == pytest.approx(0.5, rel=1e-6)  # coefficient of r^{a+g}
        assert c1 > 10 * diag.c1_stderr

    def test_pure_leading_term_has_clean_residual(self):
        a = 0.41
        r = np.geomspace(0.02, 0.5, 30)
        c1, rexp, _ = fit_leading_coefficient((r, 5.0 * r**a), a, 0.9)
        assert c1 == pytest.approx(5.0, rel=1e-10)
        assert math.isinf(rexp)

    def test_needs_enough_samples(self):
        r = np.geomspace(0.1, 0.9, 5)
        with pytest.raises(InputError):
            fit_leading_coefficient((r, r), 0.5, 0.9)

    def test_needs_a_decade(self):
        r = np.geomspace(0.2, 0.5, 30)
        with pytest.raises(InputError):
            fit_leading_coefficient((r, r**0.5), 0.5, 0.9)

    def test_accepts_stacked_array(self):
        a = 0.5
        r = np.geomspace(0.02, 0.5, 40)
        c1, _, _ = fit_leading_coefficient(np.column_stack([r, 3 * r**a]),
                                           a, 0.9)
        assert c1 == pytest.approx(3.0, rel=1e-9)


class TestCsv:
    def test_round_trip(self, tmp_path):
        sol = solve_radial_ivp(1.0, 3, 2.0, r_end=0.1, steps=1000)
        path = tmp_path / "radial.csv"
        save_radial_csv(sol, str(path))
        rows = path.read_text().strip().splitlines()
        assert rows[0].split(",")[:2] == ["r", "value"]
        assert len(rows) == sol.r_grid.size + 1
