"""Disk solver: assembly, flux bookkeeping, decay profiles, experiments."""

import csv
import math

import numpy as np
import pytest

from gapgrad import (
    GridResolutionError,
    InputError,
    ParityError,
    UnsupportedDimensionError,
    WeightSpec,
    alpha_of_lambda,
    assemble_disk_system,
    boundary_flux_balance,
    ckn_ratio,
    field_from_function,
    fit_loglog,
    gradient_rate_sweep,
    hardy_trace_ratio,
    lower_bound_experiment,
    moser_sup_check,
    omega_profile,
    polar_grid,
    solve_disk,
    verify_oscillation_decay,
)
from gapgrad.solver import DecayProfile, DiskField, save_field_csv


class TestPolarGrid:
    def test_geometry_relations(self):
        grid = polar_grid(64, 48, R0=2.0)
        assert grid.dr == pytest.approx(2.0 / 64)
        assert grid.dtheta == pytest.approx(2 * np.pi / 48)
        assert grid.r_centers.shape == (64,)
        # one face above each cell: the last one is the outer boundary
        assert grid.r_faces.shape == (64,)
        assert grid.r_faces[0] == pytest.approx(grid.dr)
        assert grid.r_faces[-1] == pytest.approx(2.0)
        np.testing.assert_allclose(grid.r_centers, grid.r_faces - grid.dr / 2)

    def test_validation(self):
        with pytest.raises(InputError):
            polar_grid(16, 64)
        with pytest.raises(InputError):
            polar_grid(64, 16)
        with pytest.raises(InputError):
            polar_grid(64, 63)  # odd angle count breaks reflections
        with pytest.raises(InputError):
            polar_grid(64, 64, R0=0.0)


class TestAssemblyValidation:
    def test_rejects_higher_dimension(self):
        spec = WeightSpec(d=4, m=2.0, kappa0=1.0, kappa=(1.0, 1.0, 1.0), set_b={1, 2, 3})
        with pytest.raises(UnsupportedDimensionError):
            assemble_disk_system(spec, 0.0, polar_grid(32, 32), None, 0.0)

    def test_rejects_negative_eps(self, ones_weight):
        with pytest.raises(InputError):
            assemble_disk_system(ones_weight, -0.1, polar_grid(32, 32), None, 0.0)

    def test_boundary_data_required_and_shaped(self, ones_weight):
        grid = polar_grid(32, 32)
        with pytest.raises(InputError):
            assemble_disk_system(ones_weight, 0.0, grid, None, None)
        with pytest.raises(InputError):
            assemble_disk_system(ones_weight, 0.0, grid, None, np.zeros(17))

    def test_field_shape_checked(self):
        grid = polar_grid(32, 32)
        with pytest.raises(InputError):
            DiskField(
                grid=grid,
                values=np.zeros((3, 3)),
                eps=0.0,
                boundary_data=np.zeros(32),
                solve_residual=0.0,
                iterations=0,
            )
        bad = np.zeros((32, 32))
        bad[0, 0] = np.nan
        with pytest.raises(InputError):
            DiskField(
                grid=grid,
                values=bad,
                eps=0.0,
                boundary_data=np.zeros(32),
                solve_residual=0.0,
                iterations=0,
            )


class TestFluxBalance:
    def test_source_flux_matches_conductive_flux(self, ones_weight):
        # radial field with unit outflow through r = 1: both sides are 2 pi
        def F(x, y):
            r = np.hypot(x, y)
            return r**1.5 * x, r**1.5 * y

        grid = polar_grid(64, 64)
        system = assemble_disk_system(ones_weight, 0.1, grid, F, 0.0)
        field = solve_disk(system, tol=1e-12)
        lhs, rhs = boundary_flux_balance(field, system)
        assert rhs == pytest.approx(2 * np.pi, rel=1e-12)
        assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_max_principle_without_source(self, cube_weight):
        grid = polar_grid(64, 64)
        rng = np.random.default_rng(3)
        g = 1.0 + 0.5 * np.sin(3 * grid.theta_centers + rng.uniform(0, 2 * np.pi))
        field = solve_disk(assemble_disk_system(cube_weight, 0.05, grid, None, g))
        assert float(field.values.min()) >= g.min() - 1e-9
        assert float(field.values.max()) <= g.max() + 1e-9


class TestModeSolution:
    def _window_error(self, field, lam1, y1, m):
        alpha = alpha_of_lambda(lam1, 3, m)
        rc = field.grid.r_centers
        exact = rc[:, None] ** alpha * y1[None, :]
        ring_err = np.max(np.abs(field.values - exact), axis=1)
        ring_scale = rc**alpha * float(np.max(np.abs(y1)))
        mask = rc >= 0.02
        return float(np.max(ring_err[mask] / ring_scale[mask]))

    def test_separable_mode_reproduced(self, ones_weight, get_mode_solution):
        # boundary data = first eigenfunction, so v = r^alpha y1(theta)
        # away from the coordinate-singular center cells
        field, lam1, y1 = get_mode_solution(ones_weight, 512, 512)
        assert self._window_error(field, lam1, y1, 2.0) <= 1e-3

    def test_second_order_convergence(self, ones_weight, get_mode_solution):
        field_c, lam_c, y1_c = get_mode_solution(ones_weight, 256, 256)
        field_f, lam_f, y1_f = get_mode_solution(ones_weight, 512, 512)
        err_c = self._window_error(field_c, lam_c, y1_c, 2.0)
        err_f = self._window_error(field_f, lam_f, y1_f, 2.0)
        assert err_c / err_f >= 3.0


class TestOmegaProfile:
    def test_mode_profile_decays_at_alpha(self, ones_weight, get_mode_solution):
        field, lam1, _ = get_mode_solution(ones_weight, 512, 512)
        alpha = alpha_of_lambda(lam1, 3, 2.0)
        profile = omega_profile(field, ones_weight, np.geomspace(0.05, 0.4, 12))
        fit = verify_oscillation_decay(profile, alpha)
        assert fit.relative_error <= 0.02
        # normalization makes omega(rho) track rho^alpha with unit constant
        assert profile.omega[0] == pytest.approx(0.05**alpha, rel=0.01)

    def test_rho_outside_grid_rejected(self, ones_weight, get_mode_solution):
        field, _, _ = get_mode_solution(ones_weight, 512, 512)
        with pytest.raises(InputError):
            omega_profile(field, ones_weight, [1e-4])

    def test_annulus_form_with_positive_eps(self, ones_weight):
        grid = polar_grid(256, 64)
        g = np.cos(grid.theta_centers)
        field = solve_disk(assemble_disk_system(ones_weight, 0.01, grid, None, g))
        profile = omega_profile(field, ones_weight, np.geomspace(0.05, 0.4, 8))
        assert np.all(profile.omega > 0)
        assert np.all(np.isfinite(profile.omega))
        # validity ceiling (1 - cbar0)^2 R0 is about 0.45 here
        with pytest.raises(InputError):
            omega_profile(field, ones_weight, [0.6])

    def test_annulus_needs_resolution(self, ones_weight):
        grid = polar_grid(32, 32)
        g = np.cos(grid.theta_centers)
        field = solve_disk(assemble_disk_system(ones_weight, 0.01, grid, None, g))
        with pytest.raises(GridResolutionError):
            omega_profile(field, ones_weight, [0.05])

    def test_profile_validation(self):
        with pytest.raises(InputError):
            DecayProfile(rho=np.array([0.2, 0.1]), omega=np.array([1.0, 1.0]))
        with pytest.raises(InputError):
            DecayProfile(rho=np.array([0.1, 0.2]), omega=np.array([1.0, -1.0]))


class TestFitLoglog:
    def test_exact_power_law(self):
        x = np.geomspace(0.01, 1.0, 10)
        fit = fit_loglog((x, 3.0 * x**2))
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert math.isnan(fit.relative_error)

    def test_noisy_rate_recovered(self):
        target = math.sqrt(2) - 1
        rng = np.random.default_rng(0)
        x = np.geomspace(0.01, 1.0, 21)
        y = x**target * (1.0 + 0.01 * rng.standard_normal(x.size))
        fit = fit_loglog((x, y), predicted=target)
        assert fit.slope == pytest.approx(0.4131993186225844, abs=1e-12)
        assert fit.relative_error <= 0.015
        assert fit.point_count == 21

    def test_stacked_array_input(self):
        x = np.geomspace(0.1, 1.0, 8)
        fit_pair = fit_loglog((x, x**0.7))
        fit_arr = fit_loglog(np.column_stack([x, x**0.7]))
        assert fit_arr.slope == fit_pair.slope

    def test_validation(self):
        x = np.array([0.1, 0.2, 0.3])
        with pytest.raises(InputError):
            fit_loglog((x, x))  # too few points
        x = np.geomspace(0.1, 1.0, 6)
        with pytest.raises(InputError):
            fit_loglog((x, x - 0.5))  # nonpositive y
        with pytest.raises(InputError):
            fit_loglog(np.zeros((4, 3)))


class TestVerifyOscillationDecay:
    def test_synthetic_rate(self):
        rho = np.geomspace(0.05, 0.4, 12)
        fit = verify_oscillation_decay(DecayProfile(rho=rho, omega=rho**0.5), 0.5)
        assert fit.slope == pytest.approx(0.5, abs=1e-12)
        assert fit.relative_error <= 1e-12

    def test_narrow_span_rejected(self):
        rho = np.geomspace(0.1, 0.4, 6)  # 4x, below the 8x floor
        with pytest.raises(InputError):
            verify_oscillation_decay(DecayProfile(rho=rho, omega=rho**0.5), 0.5)

    def test_zero_omega_rejected(self):
        rho = np.geomspace(0.05, 0.4, 6)
        omega = rho**0.5
        omega[2] = 0.0
        with pytest.raises(InputError):
            verify_oscillation_decay(DecayProfile(rho=rho, omega=omega), 0.5)


class TestGradientRateSweep:
    def test_rate_matches_prediction(self, ones_weight):
        predicted = (math.sqrt(2) - 2) / 2
        report = gradient_rate_sweep(
            ones_weight,
            None,
            [1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4],
            predicted=predicted,
        )
        assert report.fit.relative_error <= 0.01
        assert report.fit.r_squared >= 0.999
        assert not report.any_out_of_regime
        assert len(report.rows) == 5
        # radial resolution adapts: smallest eps needs the finest grid
        assert report.rows[0][2] > report.rows[-1][2]

    def test_out_of_regime_flagged(self, ones_weight):
        report = gradient_rate_sweep(
            ones_weight,
            None,
            [0.010, 0.012, 0.014, 0.016, 0.018],
            probe_radius=20.0,
            n_theta=32,
            predicted=(math.sqrt(2) - 2) / 2,
        )
        assert report.any_out_of_regime
        assert all(row[4] for row in report.rows)

    def test_pinned_grid_must_resolve_probe(self, ones_weight):
        with pytest.raises(GridResolutionError):
            gradient_rate_sweep(
                ones_weight,
                None,
                [1e-4, 2e-4, 3e-4, 4e-4, 5e-4],
                n_r=128,
                predicted=(math.sqrt(2) - 2) / 2,
            )

    def test_validation(self, ones_weight):
        with pytest.raises(InputError):
            gradient_rate_sweep(ones_weight, None, [1e-3, 2e-3, 3e-3, 4e-3])
        with pytest.raises(InputError):
            gradient_rate_sweep(ones_weight, None, [1e-3, 2e-3, 3e-3, 4e-3, -1e-3])


class TestMoserSupCheck:
    def test_custom_family_stable(self, ones_weight):
        report = moser_sup_check(
            ones_weight,
            eps=0.1,
            sigma=0.5,
            grid=polar_grid(48, 48),
            F_family=[
                ("diverging", lambda x, y: (x, y)),
                ("zero", lambda x, y: (np.zeros_like(x), np.zeros_like(y))),
            ],
        )
        assert report.stable
        assert report.levels == ((48, 48), (96, 48), (192, 48))
        name, norm_val, sups, ratios, stable = report.entries[0]
        assert name == "diverging"
        assert norm_val > 0
        assert len(sups) == 3 and len(ratios) == 2
        assert stable
        # the zero field short-circuits with an empty ratio tuple
        assert report.entries[1][1] == 0.0
        assert report.entries[1][3] == ()

    def test_default_family_stable(self, ones_weight):
        report = moser_sup_check(ones_weight, eps=0.1, sigma=0.5, grid=polar_grid(48, 48))
        assert report.stable
        assert len(report.entries) == 3

    def test_sigma_floor(self, ones_weight):
        with pytest.raises(InputError):
            moser_sup_check(ones_weight, eps=0.1, sigma=-1.0, grid=polar_grid(48, 48))


class TestLowerBoundExperiment:
    def test_constant_weight_routes_coincide(self, ones_weight):
        # for a flat weight both projections use the same reference, so the
        # two routes agree and C1 = 1/sqrt(2) analytically
        report = lower_bound_experiment(ones_weight, polar_grid(512, 128), gamma=0.9)
        assert not report.degenerate
        assert report.c1 == pytest.approx(1 / math.sqrt(2), rel=2e-4)
        assert report.coord_c1 == pytest.approx(report.c1, rel=1e-10)
        assert report.c1 > 10 * report.c1_stderr
        assert report.lambda1 == pytest.approx(1.0, abs=1e-3)
        assert report.alpha == pytest.approx(math.sqrt(2) - 1, abs=5e-4)

    def test_even_boundary_data_degenerates(self, ones_weight):
        grid = polar_grid(128, 64)
        report = lower_bound_experiment(
            ones_weight, grid, gamma=0.9, g=np.cos(2 * grid.theta_centers)
        )
        assert report.degenerate
        assert report.c1 == 0.0
        assert report.diagnostics is None

    def test_bad_parity_index_rejected(self, ones_weight):
        with pytest.raises(ParityError):
            lower_bound_experiment(ones_weight, polar_grid(64, 64), gamma=0.9, j0=5)

    def test_fit_window_needs_rings(self, ones_weight):
        with pytest.raises(InputError):
            lower_bound_experiment(
                ones_weight, polar_grid(64, 64), gamma=0.9, fit_window=(0.40, 0.45)
            )


@pytest.fixture(scope="module")
def bump():
    grid = polar_grid(256, 64)
    return field_from_function(grid, lambda r, t: (1 - r**2) * (1 + 0.3 * np.cos(t)))


class TestWeightedRatios:
    def test_trace_energy_ratio(self, bump):
        report = hardy_trace_ratio(bump, beta=0.5, m=2.0)
        assert not report.degenerate
        assert report.value == pytest.approx(0.023513279264476987, rel=1e-9)

    def test_interpolation_ratio_scale_invariant(self, bump):
        base = ckn_ratio(bump, m=2.0)
        scaled = ckn_ratio(
            field_from_function(bump.grid, lambda r, t: 7.0 * (1 - r**2) * (1 + 0.3 * np.cos(t))),
            m=2.0,
        )
        assert base.value == pytest.approx(0.2872687309295846, rel=1e-9)
        assert scaled.value == pytest.approx(base.value, rel=1e-12)

    def test_zero_field_degenerate(self):
        zero = field_from_function(polar_grid(64, 64), lambda r, t: np.zeros_like(r))
        assert hardy_trace_ratio(zero, beta=0.5, m=2.0).degenerate
        assert ckn_ratio(zero, m=2.0).degenerate

    def test_validation(self, bump):
        with pytest.raises(InputError):
            hardy_trace_ratio(bump, beta=1.0, m=2.0)
        with pytest.raises(UnsupportedDimensionError):
            hardy_trace_ratio(bump, beta=0.5, m=2.0, d=4)
        with pytest.raises(UnsupportedDimensionError):
            ckn_ratio(bump, m=2.0, d=4)
        leaky = field_from_function(polar_grid(64, 64), lambda r, t: 1.0 + r**2)
        with pytest.raises(InputError):
            hardy_trace_ratio(leaky, beta=0.5, m=2.0)
        with pytest.raises(InputError):
            ckn_ratio(leaky, m=2.0)


class TestFieldCsv:
    def test_round_trip(self, tmp_path):
        grid = polar_grid(32, 32)
        field = field_from_function(grid, lambda r, t: r * np.cos(t))
        path = tmp_path / "field.csv"
        save_field_csv(field, str(path))
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["r", "theta", "value"]
        assert len(rows) == 1 + 32 * 32
        r, t, v = (float(x) for x in rows[1])
        assert v == pytest.approx(r * math.cos(t), rel=1e-12)
