"""Degenerate elliptic solver on the unit disk and its measurements.

The reduced gap equation is div(delta grad v) = div F on a disk, with
delta(r, theta) = eps + kappa(theta) r^m degenerating at the origin when
eps = 0.  A cell-centered polar finite-volume scheme keeps every face
coefficient strictly positive (no node sits at r = 0) and yields a
symmetric positive definite system solved by diagonally preconditioned
conjugate gradients.

Measurement operations: oscillation profiles omega(rho), log-log rate
fits, Moser-type sup-norm stability checks, the eps-sweep gradient rate
experiment, the leading-coefficient lower-bound experiment, and weighted
Hardy / Caffarelli-Kohn-Nirenberg ratio probes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse

from .errors import (
    ConvergenceError,
    ExperimentError,
    GridResolutionError,
    InputError,
    ParityError,
    UnsupportedDimensionError,
)
from .exponents import alpha_of_lambda, predict_rates
from .geometry import NormSpec, WeightSpec, derived_constants, weighted_norm
from .radial import FitDiagnostics, fit_leading_coefficient
from .spectral import (
    assemble_operator,
    circle_grid,
    odd_sector_member,
    parity_analysis,
    solve_spectrum,
)

__all__ = [
    "PolarGrid",
    "polar_grid",
    "DiskSystem",
    "DiskField",
    "DecayProfile",
    "RateFit",
    "MoserReport",
    "SweepReport",
    "LowerBoundReport",
    "RatioReport",
    "assemble_disk_system",
    "solve_disk",
    "field_from_function",
    "max_gradient",
    "omega_profile",
    "fit_loglog",
    "verify_oscillation_decay",
    "moser_sup_check",
    "gradient_rate_sweep",
    "lower_bound_experiment",
    "hardy_trace_ratio",
    "ckn_ratio",
    "boundary_flux_balance",
    "save_field_csv",
]


@dataclass(frozen=True)
class PolarGrid:
    """Cell-centered polar grid: radii (i+1/2) dr, angles (j+1/2) dtheta."""

    n_r: int
    n_theta: int
    R0: float = 1.0

    def __post_init__(self):
        if self.n_r < 32 or self.n_theta < 32:
            raise InputError("polar grid needs n_r, n_theta >= 32")
        if self.n_theta % 2:
            raise InputError("n_theta must be even (reflection symmetry)")
        if not self.R0 > 0:
            raise InputError("R0 must be positive")

    @property
    def dr(self) -> float:
        return self.R0 / self.n_r

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.n_theta

    @property
    def r_centers(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.dr

    @property
    def r_faces(self) -> np.ndarray:
        """Interior and outer faces, radii (i+1) dr for i = 0..n_r-1."""
        return (np.arange(self.n_r) + 1.0) * self.dr

    @property
    def theta_centers(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.dtheta

    @property
    def theta_faces(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 1.0) * self.dtheta


def polar_grid(n_r: int, n_theta: int, R0: float = 1.0) -> PolarGrid:
    return PolarGrid(n_r=n_r, n_theta=n_theta, R0=R0)


@dataclass(frozen=True)
class DiskSystem:
    """Assembled SPD system plus the data needed for flux bookkeeping."""

    matrix: scipy.sparse.csr_matrix
    rhs: np.ndarray
    grid: PolarGrid
    spec: WeightSpec
    eps: float
    g_values: np.ndarray
    boundary_coef: np.ndarray  # Dirichlet elimination coefficients per theta
    boundary_source_flux: float  # total F flux through the outer boundary


@dataclass(frozen=True)
class DiskField:
    grid: PolarGrid
    values: np.ndarray
    eps: float
    boundary_data: np.ndarray
    solve_residual: float
    iterations: int

    def __post_init__(self):
        if self.values.shape != (self.grid.n_r, self.grid.n_theta):
            raise InputError("field shape disagrees with grid")
        if not np.all(np.isfinite(self.values)):
            raise InputError("field values must be finite")


@dataclass(frozen=True)
class DecayProfile:
    rho: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        if self.rho.shape != self.omega.shape or self.rho.ndim != 1:
            raise InputError("rho and omega must be matching 1-D arrays")
        if np.any(np.diff(self.rho) <= 0):
            raise InputError("rho must be strictly increasing")
        if np.any(self.omega < 0):
            raise InputError("omega must be nonnegative")


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    point_count: int
    predicted: float
    relative_error: float

    def __post_init__(self):
        if self.point_count < 4:
            raise InputError("rate fits need at least 4 points")

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "point_count": self.point_count,
            "predicted": self.predicted,
            "relative_error": self.relative_error,
        }


def _g_samples(g, grid: PolarGrid) -> np.ndarray:
    if g is None:
        raise InputError("boundary data g is required")
    if callable(g):
        vals = np.asarray(g(grid.theta_centers), dtype=float)
    elif np.isscalar(g):
        vals = np.full(grid.n_theta, float(g))
    else:
        vals = np.asarray(g, dtype=float)
    if vals.shape != (grid.n_theta,):
        raise InputError("g must sample to one value per theta cell")
    return vals


def assemble_disk_system(
    spec: WeightSpec,
    eps: float,
    grid: PolarGrid,
    F: Callable[[np.ndarray, np.ndarray], tuple] | None,
    g,
) -> DiskSystem:
    """Flux-form discretization of div(delta grad v) = div F, Dirichlet g.

    Face conductances use pointwise delta at face midpoints.  ``F`` is a
    Cartesian vector field: F(x, y) -> (Fx, Fy), evaluated at face
    midpoints; None means zero.  ``g`` is a callable of theta, an array of
    n_theta samples, or a scalar.
    """
    if spec.d != 3:
        raise UnsupportedDimensionError("disk solver requires d=3")
    if eps < 0:
        raise InputError("eps must be >= 0")
    from .spectral import _kappa_on  # same theta sampling as the circle solver

    nr, nt = grid.n_r, grid.n_theta
    dr, dt = grid.dr, grid.dtheta
    rc, rf = grid.r_centers, grid.r_faces
    tc, tf = grid.theta_centers, grid.theta_faces
    kc = _kappa_on(spec, tc)
    kf = _kappa_on(spec, tf)
    gv = _g_samples(g, grid)

    def idx(i, j):
        return i * nt + j

    rows: list = []
    cols: list = []
    data: list = []
    b = np.zeros(nr * nt)

    ii, jj = np.meshgrid(np.arange(nr - 1), np.arange(nt), indexing="ij")
    # interior radial faces between (i, j) and (i+1, j)
    cond_r = (eps + kc[jj] * rf[ii] ** spec.m) * rf[ii] * dt / dr
    a_idx = idx(ii, jj).ravel()
    b_idx = idx(ii + 1, jj).ravel()
    cr = cond_r.ravel()
    rows += [a_idx, a_idx, b_idx, b_idx]
    cols += [a_idx, b_idx, b_idx, a_idx]
    data += [cr, -cr, cr, -cr]

    # outer Dirichlet boundary: half-cell flux to the boundary value
    cb = (eps + kc * grid.R0**spec.m) * grid.R0 * dt / (dr / 2.0)
    top = idx(nr - 1, np.arange(nt))
    rows.append(top)
    cols.append(top)
    data.append(cb)
    b[top] += cb * gv

    # angular faces between (i, j) and (i, j+1 mod nt)
    i2, j2 = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
    cond_t = (eps + kf[j2] * rc[i2] ** spec.m) * dr / (rc[i2] * dt)
    a2 = idx(i2, j2).ravel()
    b2 = idx(i2, (j2 + 1) % nt).ravel()
    ct = cond_t.ravel()
    rows += [a2, a2, b2, b2]
    cols += [a2, b2, b2, a2]
    data += [ct, -ct, ct, -ct]

    boundary_source = 0.0
    if F is not None:
        # div F enters as the sum of outward face fluxes of F per cell
        xr = rf[:, None] * np.cos(tc)[None, :]
        yr = rf[:, None] * np.sin(tc)[None, :]
        fx, fy = F(xr, yr)
        f_rad = (
            np.asarray(fx, dtype=float) * np.cos(tc)[None, :]
            + np.asarray(fy, dtype=float) * np.sin(tc)[None, :]
        )
        flux_r = f_rad * rf[:, None] * dt  # outward through face (i+1/2 -> i+1)
        for i in range(nr):
            cells = idx(i, np.arange(nt))
            b[cells] -= flux_r[i]  # outward flux of cell i through its east face
            if i + 1 < nr:
                b[idx(i + 1, np.arange(nt))] += flux_r[i]  # inward for the neighbor
        boundary_source = float(np.sum(flux_r[nr - 1]))

        xa = rc[:, None] * np.cos(tf)[None, :]
        ya = rc[:, None] * np.sin(tf)[None, :]
        fx_a, fy_a = F(xa, ya)
        f_ang = (
            -np.asarray(fx_a, dtype=float) * np.sin(tf)[None, :]
            + np.asarray(fy_a, dtype=float) * np.cos(tf)[None, :]
        )
        flux_t = f_ang * dr  # through the face between j and j+1
        for j in range(nt):
            b[idx(np.arange(nr), j)] -= flux_t[:, j]
            b[idx(np.arange(nr), (j + 1) % nt)] += flux_t[:, j]

    rows_arr = np.concatenate([np.asarray(r).ravel() for r in rows])
    cols_arr = np.concatenate([np.asarray(c).ravel() for c in cols])
    data_arr = np.concatenate([np.asarray(v).ravel() for v in data])
    a_mat = scipy.sparse.csr_matrix(
        (data_arr, (rows_arr, cols_arr)), shape=(nr * nt, nr * nt)
    )
    return DiskSystem(
        matrix=a_mat,
        rhs=b,
        grid=grid,
        spec=spec,
        eps=eps,
        g_values=gv,
        boundary_coef=cb,
        boundary_source_flux=boundary_source,
    )


def _pcg(a_mat, b, tol: float, max_iter: int):
    """Jacobi-preconditioned conjugate gradients, relative residual stop."""
    diag = a_mat.diagonal()
    if np.any(diag <= 0):
        raise InputError("system diagonal must be positive")
    inv_d = 1.0 / diag
    x = np.zeros_like(b)
    r = b.copy()
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return x, 0, [0.0]
    z = inv_d * r
    p = z.copy()
    rz = float(r @ z)
    history = []
    for it in range(1, max_iter + 1):
        ap = a_mat @ p
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rel = float(np.linalg.norm(r)) / norm_b
        history.append(rel)
        if rel <= tol:
            return x, it, history
        z = inv_d * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"PCG stalled at relative residual {history[-1]:.3e} after {max_iter} iterations",
        residual_history=history,
    )


def solve_disk(system: DiskSystem, tol: float = 1e-10, max_iter: int | None = None) -> DiskField:
    if max_iter is None:
        max_iter = 10000 + 20 * system.grid.n_r
    x, iters, history = _pcg(system.matrix, system.rhs, tol, max_iter)
    values = x.reshape(system.grid.n_r, system.grid.n_theta)
    return DiskField(
        grid=system.grid,
        values=values,
        eps=system.eps,
        boundary_data=system.g_values,
        solve_residual=history[-1] if history else 0.0,
        iterations=iters,
    )


def field_from_function(
    grid: PolarGrid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], eps: float = 0.0
) -> DiskField:
    """Wrap an analytic profile fn(r, theta) as a DiskField (for ratio probes)."""
    rr, tt = np.meshgrid(grid.r_centers, grid.theta_centers, indexing="ij")
    vals = np.asarray(fn(rr, tt), dtype=float)
    bd = np.asarray(
        fn(np.full(grid.n_theta, grid.R0), grid.theta_centers), dtype=float
    )
    return DiskField(
        grid=grid,
        values=vals,
        eps=eps,
        boundary_data=bd,
        solve_residual=0.0,
        iterations=0,
    )


def boundary_flux_balance(field: DiskField, system: DiskSystem):
    """(conductive boundary flux, source boundary flux), equal in balance.

    Integrating the equation over the whole disk telescopes the interior
    fluxes; what remains is the conductive flux through the outer circle on
    the left and the F flux through it on the right.
    """
    out = field.values[-1]
    lhs = float(np.sum(system.boundary_coef * (system.g_values - out)))
    return lhs, system.boundary_source_flux


def max_gradient(field: DiskField, r_max: float) -> float:
    """Max face-difference gradient magnitude over faces with r <= r_max."""
    grid = field.grid
    v = field.values
    gr = (v[1:, :] - v[:-1, :]) / grid.dr  # at interior radial faces
    rad_mask = grid.r_faces[:-1] <= r_max
    gt = (np.roll(v, -1, axis=1) - v) / (grid.r_centers[:, None] * grid.dtheta)
    ang_mask = grid.r_centers <= r_max
    best = 0.0
    if np.any(rad_mask):
        best = max(best, float(np.max(np.abs(gr[rad_mask, :]))))
    if np.any(ang_mask):
        best = max(best, float(np.max(np.abs(gt[ang_mask, :]))))
    if best == 0.0 and not (np.any(rad_mask) or np.any(ang_mask)):
        raise GridResolutionError(f"no grid faces inside r <= {r_max}")
    return best


def _kappa_centers(spec: WeightSpec, grid: PolarGrid) -> np.ndarray:
    from .spectral import _kappa_on

    return _kappa_on(spec, grid.theta_centers)


def _ring_values(field: DiskField, rho: float) -> np.ndarray:
    """Linear radial interpolation of the field onto the circle r = rho."""
    rc = field.grid.r_centers
    if rho < rc[0] or rho > rc[-1]:
        raise InputError(f"rho={rho} outside grid coverage [{rc[0]}, {rc[-1]}]")
    i = int(np.searchsorted(rc, rho)) - 1
    i = max(0, min(i, len(rc) - 2))
    t = (rho - rc[i]) / (rc[i + 1] - rc[i])
    return (1.0 - t) * field.values[i] + t * field.values[i + 1]


def omega_profile(
    field: DiskField,
    spec: WeightSpec,
    rho_list: Sequence[float],
    center_value: float | None = None,
) -> DecayProfile:
    """Oscillation profile omega(rho).

    eps = 0: weighted RMS over circles,
        omega(rho) = (mean_theta kappa |v(rho,.) - ref|^2)^{1/2},
    with ref the kappa-mean over the innermost cell ring (or the given
    center_value).  eps > 0: RMS over the annulus (1 +- cbar0) rho around
    the kappa-weighted annulus mean, valid for rho <= (1-cbar0)^2 R0.
    """
    rho = np.asarray(sorted(float(x) for x in rho_list), dtype=float)
    if rho.size == 0:
        raise InputError("rho_list must be nonempty")
    kc = _kappa_centers(spec, field.grid)
    if field.eps == 0.0:
        if center_value is None:
            ref = float(np.sum(kc * field.values[0]) / np.sum(kc))
        else:
            ref = float(center_value)
        omega = np.empty_like(rho)
        for i, p in enumerate(rho):
            ring = _ring_values(field, p)
            omega[i] = math.sqrt(float(np.mean(kc * (ring - ref) ** 2)))
        return DecayProfile(rho=rho, omega=omega)

    cbar0 = derived_constants(spec).cbar0
    grid = field.grid
    rc = grid.r_centers
    omega = np.empty_like(rho)
    for i, p in enumerate(rho):
        if p > (1.0 - cbar0) ** 2 * grid.R0:
            raise InputError(
                f"rho={p} outside the annulus validity range "
                f"(must be <= (1-cbar0)^2 R0 = {(1 - cbar0) ** 2 * grid.R0:.4g})"
            )
        mask = (rc >= (1.0 - cbar0) * p) & (rc <= (1.0 + cbar0) * p)
        if np.count_nonzero(mask) < 2:
            raise GridResolutionError(
                f"annulus at rho={p} covers fewer than 2 cell rings; refine n_r"
            )
        block = field.values[mask]
        wgt = rc[mask][:, None] * np.ones_like(kc)[None, :]
        ref = float(np.sum(wgt * kc[None, :] * block) / np.sum(wgt * kc[None, :]))
        omega[i] = math.sqrt(float(np.sum(wgt * (block - ref) ** 2) / np.sum(wgt)))
    return DecayProfile(rho=rho, omega=omega)


def fit_loglog(points, predicted: float | None = None) -> RateFit:
    """Least-squares slope of log y against log x.

    ``points`` is (x, y) as two arrays or an (N, 2) array; all values must
    be positive.  When ``predicted`` is given the relative slope error is
    filled in, otherwise it is NaN.
    """
    if isinstance(points, tuple) or (isinstance(points, list) and len(points) == 2):
        x = np.asarray(points[0], dtype=float)
        y = np.asarray(points[1], dtype=float)
    else:
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InputError("points must be (x, y) arrays or an (N, 2) array")
        x, y = arr[:, 0], arr[:, 1]
    if x.size != y.size or x.size < 4:
        raise InputError("need at least 4 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InputError("log-log fit needs positive x and y")
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, _, _, _ = np.linalg.lstsq(design, ly, rcond=None)
    fitted = design @ coef
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    slope = float(coef[0])
    if predicted is None:
        pred, rel = math.nan, math.nan
    else:
        pred = float(predicted)
        rel = abs(slope - pred) / abs(pred) if pred != 0 else math.inf
    return RateFit(
        slope=slope,
        intercept=float(coef[1]),
        r_squared=max(0.0, min(1.0, r2)),
        point_count=int(x.size),
        predicted=pred,
        relative_error=rel,
    )


def verify_oscillation_decay(profile: DecayProfile, predicted_alpha: float) -> RateFit:
    """Fit the decay rate of an omega profile against a predicted exponent.

    Needs >= 4 points with positive omega whose radii span at least a
    factor of 8 (the standard measurement window [0.05 R0, 0.4 R0] is
    exactly 8x wide).
    """
    if np.any(profile.omega <= 0):
        raise InputError("omega values must be positive to fit a rate")
    if profile.rho.size < 4:
        raise InputError("need at least 4 profile points")
    span = float(profile.rho[-1] / profile.rho[0])
    if span < 8.0 - 1e-9:
        raise InputError(f"rho span {span:.2f}x too narrow; need >= 8x")
    return fit_loglog((profile.rho, profile.omega), predicted=predicted_alpha)


@dataclass(frozen=True)
class MoserReport:
    """Sup-norm stability of zero-boundary solves under refinement."""

    sigma: float
    eps: float
    entries: tuple  # per F: (name, norm_value, sups, ratios, stable)
    levels: tuple  # (n_r, n_theta) per refinement level
    stable: bool


def _face_points(grid: PolarGrid):
    """All face midpoints (x, y, radius) for norm sampling."""
    rf, rc = grid.r_faces, grid.r_centers
    tc, tf = grid.theta_centers, grid.theta_faces
    xr = (rf[:, None] * np.cos(tc)[None, :]).ravel()
    yr = (rf[:, None] * np.sin(tc)[None, :]).ravel()
    xa = (rc[:, None] * np.cos(tf)[None, :]).ravel()
    ya = (rc[:, None] * np.sin(tf)[None, :]).ravel()
    x = np.concatenate([xr, xa])
    y = np.concatenate([yr, ya])
    return x, y, np.hypot(x, y)


def moser_sup_check(
    spec: WeightSpec,
    eps: float,
    sigma: float,
    grid: PolarGrid,
    F_family=None,
    tol: float = 1e-10,
    max_workers: int | None = None,
) -> MoserReport:
    """Solve div(delta grad v) = div F with zero boundary data and check
    that sup|v| / ||F|| stays put as n_r doubles twice.

    Each F is normalized to unit weighted norm (indices (eps, sigma, 0))
    over the face midpoints of the base grid before solving.
    """
    if not 1.0 + sigma > 0:
        raise InputError(f"need 1 + sigma > 0, got sigma={sigma}")
    if F_family is None:
        m = spec.m

        def f_x(x, y):
            r = np.hypot(x, y)
            return r ** (sigma + m), np.zeros_like(x)

        def f_radial(x, y):
            r = np.hypot(x, y)
            amp = r ** (sigma + m - 1.0)
            return amp * x, amp * y

        def f_lobed(x, y):
            r = np.hypot(x, y)
            amp = r ** (sigma + m - 1.0) * (x / np.maximum(r, 1e-300))
            return amp * x, amp * y

        F_family = [("x_aligned", f_x), ("radial", f_radial), ("lobed", f_lobed)]

    levels = tuple(
        (grid.n_r * (2**lv), grid.n_theta) for lv in range(3)
    )
    fx_pts, fy_pts, radii = _face_points(grid)
    norm_spec = NormSpec(eps=eps, sigma=sigma, tau=0.0)

    entries = []
    all_stable = True
    for name, f_fn in F_family:
        fx, fy = f_fn(fx_pts, fy_pts)
        vec = np.column_stack([np.asarray(fx, dtype=float), np.asarray(fy, dtype=float)])
        norm_val = weighted_norm(vec, radii, norm_spec, spec.m)
        if norm_val == 0.0:
            entries.append((name, 0.0, (0.0,) * len(levels), (), True))
            continue

        def scaled(x, y, fn=f_fn, s=norm_val):
            a, b = fn(x, y)
            return np.asarray(a) / s, np.asarray(b) / s

        def level_sup(shape):
            g = polar_grid(shape[0], shape[1], grid.R0)
            system = assemble_disk_system(spec, eps, g, scaled, 0.0)
            return float(np.max(np.abs(solve_disk(system, tol=tol).values)))

        sups = _map_maybe_parallel(level_sup, levels, max_workers)
        ratios = tuple(
            sups[i + 1] / sups[i] if sups[i] > 0 else math.inf
            for i in range(len(sups) - 1)
        )
        stable = all(abs(r - 1.0) <= 0.10 for r in ratios)
        all_stable = all_stable and stable
        entries.append((name, norm_val, tuple(sups), ratios, stable))
    return MoserReport(
        sigma=sigma,
        eps=eps,
        entries=tuple(entries),
        levels=levels,
        stable=all_stable,
    )


def _map_maybe_parallel(fn, items, max_workers):
    if max_workers is None or max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SweepReport:
    fit: RateFit
    rows: tuple  # (eps, max_gradient, n_r, iterations, out_of_regime)
    predicted_exponent: float
    any_out_of_regime: bool


def gradient_rate_sweep(
    spec: WeightSpec,
    g,
    eps_list: Sequence[float],
    probe_radius: float = 2.0,
    n_theta: int = 64,
    n_r: int | None = None,
    R0: float = 1.0,
    cells_across: int = 16,
    tol: float = 1e-10,
    predicted: float | None = None,
    spectral_n: int = 1024,
    max_workers: int | None = None,
) -> SweepReport:
    """Measure max|grad v| on the probe disk |x'| <= probe_radius eps^{1/m}
    for each eps and fit its power law in eps.

    The radial resolution adapts per eps so at least ``cells_across`` cells
    span the probe scale (>= 8 is enforced when n_r is pinned by hand).  A
    probe scale beyond R0/2 is out of the asymptotic regime; such rows are
    still measured but flagged, and they flag the whole report.  The
    predicted exponent defaults to (alpha - 1)/m with alpha derived from
    the computed spectrum.
    """
    eps_arr = sorted(float(e) for e in eps_list)
    if len(eps_arr) < 5:
        raise InputError("eps sweep needs at least 5 values")
    if any(e <= 0 for e in eps_arr):
        raise InputError("eps values must be positive")
    if g is None:
        gr = circle_grid(n_theta)
        k_mat, m_mat = assemble_operator(spec, gr)
        g = solve_spectrum(k_mat, m_mat, k=2, grid=gr).eigenfunctions[:, 1]
    if predicted is None:
        report = predict_rates(spec, use_shortcut=False, n=spectral_n)
        predicted = report.gradient_exponent_eps

    def one(eps: float):
        scale = probe_radius * eps ** (1.0 / spec.m)
        out_of_regime = scale > R0 / 2.0
        probe = min(scale, R0)
        if n_r is None:
            n_r_eff = max(256, int(math.ceil(cells_across * R0 / probe)))
        else:
            n_r_eff = n_r
            if n_r_eff * probe / R0 < 8.0 - 1e-9:
                raise GridResolutionError(
                    f"n_r={n_r_eff} puts fewer than 8 cells across the probe "
                    f"scale {probe:.3g}; refine the grid"
                )
        grid = polar_grid(n_r_eff, n_theta, R0)
        system = assemble_disk_system(spec, eps, grid, None, g)
        field = solve_disk(system, tol=tol)
        return (eps, max_gradient(field, probe), n_r_eff, field.iterations, out_of_regime)

    rows = _map_maybe_parallel(one, eps_arr, max_workers)
    fit = fit_loglog(
        (np.array([r[0] for r in rows]), np.array([r[1] for r in rows])),
        predicted=predicted,
    )
    return SweepReport(
        fit=fit,
        rows=tuple(rows),
        predicted_exponent=float(predicted),
        any_out_of_regime=any(r[4] for r in rows),
    )


@dataclass(frozen=True)
class LowerBoundReport:
    """Two projection routes for the leading-coefficient experiment.

    The mode route projects onto the computed first odd eigenfunction; its
    U(r) is an exact discrete mode, so c1 and c1_stderr are the sharp
    leading-coefficient estimates while its residual is pure truncation.
    The coordinate route projects onto the normalized odd coordinate
    function, which mixes in the genuinely-higher modes, so its residual
    exponent measures how fast the corrections beyond the leading mode
    decay.  For a constant weight the two routes coincide.
    """

    c1: float
    residual_exponent: float
    c1_stderr: float
    coord_c1: float
    coord_residual_exponent: float
    coord_c1_stderr: float
    degenerate: bool
    j0: int
    lambda1: float
    alpha: float
    r_samples: np.ndarray
    u_samples: np.ndarray
    coord_u_samples: np.ndarray
    diagnostics: FitDiagnostics | None
    coord_diagnostics: FitDiagnostics | None


def lower_bound_experiment(
    spec: WeightSpec,
    grid: PolarGrid,
    gamma: float,
    g=None,
    j0: int | None = None,
    fit_window: tuple = (0.03, 0.45),
    tol: float = 1e-10,
) -> LowerBoundReport:
    """Leading-coefficient experiment for the blow-up lower bound.

    Solves the touching-case (eps = 0) disk problem and projects each ring
    of the solution onto two odd references: the computed first odd
    eigenfunction (sharp C1, exact mode) and the normalized odd coordinate
    function (picks up the higher-mode corrections, giving a meaningful
    residual exponent).  Both are fitted as U(r) = C1 r^alpha +
    O(r^{alpha+gamma}).  Requires the first eigenspace to contain an odd
    member (checked); boundary data defaults to the coordinate function
    xi_{j0}.  Boundary data with no odd component yields a degenerate
    report rather than an error.
    """
    gr = circle_grid(grid.n_theta)
    k_mat, m_mat = assemble_operator(spec, gr)
    spectrum = solve_spectrum(k_mat, m_mat, k=3, grid=gr)
    flags = parity_analysis(spectrum, 1)  # raises ParityError for uneven weights
    candidates = [j for j, ok in sorted(flags.items()) if ok]
    if j0 is None:
        if not candidates:
            raise ParityError("first eigenspace has no odd-sector member")
        j0 = candidates[0]
    elif not flags.get(j0, False):
        raise ParityError(f"first eigenspace has no member odd in coordinate {j0}")
    y_mode = odd_sector_member(spectrum, 1, j0)
    lam1 = float(spectrum.eigenvalues[1])
    alpha = alpha_of_lambda(lam1, spec.d, spec.m)
    kc = spectrum.kappa_centers
    coord = (
        np.cos(grid.theta_centers) if j0 == 1 else np.sin(grid.theta_centers)
    )
    y_coord = coord / math.sqrt(float(np.mean(kc * coord**2)))

    if g is None:
        g = coord.copy()
    system = assemble_disk_system(spec, 0.0, grid, None, g)
    field = solve_disk(system, tol=tol)

    rc = grid.r_centers
    lo, hi = fit_window
    mask = (rc >= lo) & (rc <= hi)
    if np.count_nonzero(mask) < 8:
        raise InputError("fit window covers fewer than 8 rings; refine n_r")
    r_w = rc[mask]
    u_mode = (field.values * (kc * y_mode)[None, :]).mean(axis=1)[mask]
    u_coord = (field.values * (kc * y_coord)[None, :]).mean(axis=1)[mask]

    scale = float(np.max(np.abs(field.values)))
    if float(np.max(np.abs(u_mode))) <= 1e-8 * scale:
        return LowerBoundReport(
            c1=0.0,
            residual_exponent=math.nan,
            c1_stderr=math.nan,
            coord_c1=0.0,
            coord_residual_exponent=math.nan,
            coord_c1_stderr=math.nan,
            degenerate=True,
            j0=j0,
            lambda1=lam1,
            alpha=alpha,
            r_samples=r_w,
            u_samples=u_mode,
            coord_u_samples=u_coord,
            diagnostics=None,
            coord_diagnostics=None,
        )
    c1, rexp, diags = fit_leading_coefficient((r_w, u_mode), alpha, gamma)
    c1c, rexpc, diagsc = fit_leading_coefficient((r_w, u_coord), alpha, gamma)
    if c1 <= 0:
        raise ExperimentError(
            f"leading coefficient C1={c1:.4g} is not positive; "
            "the lower-bound structure failed"
        )
    return LowerBoundReport(
        c1=c1,
        residual_exponent=rexp,
        c1_stderr=diags.c1_stderr,
        coord_c1=c1c,
        coord_residual_exponent=rexpc,
        coord_c1_stderr=diagsc.c1_stderr,
        degenerate=False,
        j0=j0,
        lambda1=lam1,
        alpha=alpha,
        r_samples=r_w,
        u_samples=u_mode,
        coord_u_samples=u_coord,
        diagnostics=diags,
        coord_diagnostics=diagsc,
    )


@dataclass(frozen=True)
class RatioReport:
    value: float
    numerator: float
    denominator: float
    degenerate: bool


def _require_zero_boundary(field: DiskField):
    scale = max(float(np.max(np.abs(field.values))), 1e-300)
    if float(np.max(np.abs(field.boundary_data))) > 1e-10 * scale:
        raise InputError("field must vanish on the outer boundary")


def _weighted_gradient_energy(field: DiskField, exponent: float) -> float:
    """Face-quadrature of int |x|^exponent |grad w|^2 including the
    half-cell boundary faces (w = 0 outside)."""
    grid = field.grid
    v = field.values
    dr, dt = grid.dr, grid.dtheta
    rf, rc = grid.r_faces, grid.r_centers
    gr = (v[1:, :] - v[:-1, :]) / dr
    e_rad = float(np.sum(rf[:-1, None] ** exponent * gr**2 * rf[:-1, None] * dt * dr))
    gb = (0.0 - v[-1, :]) / (dr / 2.0)
    e_bnd = float(np.sum(grid.R0**exponent * gb**2 * grid.R0 * dt * (dr / 2.0)))
    gt = (np.roll(v, -1, axis=1) - v) / (rc[:, None] * dt)
    e_ang = float(np.sum(rc[:, None] ** exponent * gt**2 * rc[:, None] * dt * dr))
    return e_rad + e_bnd + e_ang


def hardy_trace_ratio(
    w: DiskField, beta: float, m: float, d: int = 3
) -> RatioReport:
    """Trace-to-energy ratio sup_r r^{d+m-2} avg_{circle} w^2 over
    int |x|^{m+beta} |grad w|^2 for zero-boundary fields.

    Finite and refinement-stable when the weighted energy controls the
    trace; identically-zero fields are reported degenerate.
    """
    if beta >= 1.0:
        raise InputError(f"beta={beta} must be < 1")
    if d != 3:
        raise UnsupportedDimensionError("ratio probes are implemented for d=3")
    _require_zero_boundary(w)
    rc = w.grid.r_centers
    trace = rc ** (d + m - 2.0) * np.mean(w.values**2, axis=1)
    lhs = float(np.max(trace))
    rhs = _weighted_gradient_energy(w, m + beta)
    scale = max(float(np.max(np.abs(w.values))), 1e-300)
    if lhs <= 1e-28 * scale**2 and rhs <= 1e-28 * scale**2:
        return RatioReport(math.nan, lhs, rhs, degenerate=True)
    return RatioReport(lhs / rhs, lhs, rhs, degenerate=False)


def ckn_ratio(u: DiskField, m: float, d: int = 3) -> RatioReport:
    """Weighted interpolation-inequality ratio
    ||u||_{L^p(|x|^m)} / ||grad u||_{L^2(|x|^m)} with p = 2(d+m-1)/(d+m-3).

    Scale-invariant by construction; zero-gradient fields are degenerate.
    """
    if d != 3:
        raise UnsupportedDimensionError("ratio probes are implemented for d=3")
    _require_zero_boundary(u)
    p = 2.0 * (d + m - 1.0) / (d + m - 3.0)
    grid = u.grid
    rc = grid.r_centers
    cell_area = rc[:, None] * grid.dr * grid.dtheta
    num = float(
        np.sum(np.abs(u.values) ** p * rc[:, None] ** m * cell_area) ** (1.0 / p)
    )
    den = math.sqrt(_weighted_gradient_energy(u, m))
    scale = max(float(np.max(np.abs(u.values))), 1e-300)
    if den <= 1e-14 * scale:
        return RatioReport(math.nan, num, den, degenerate=True)
    return RatioReport(num / den, num, den, degenerate=False)


def save_field_csv(field: DiskField, path: str):
    grid = field.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "theta", "value"])
        for i, r in enumerate(grid.r_centers):
            for j, t in enumerate(grid.theta_centers):
                writer.writerow([f"{r:.16g}", f"{t:.16g}", f"{field.values[i, j]:.16g}"])
