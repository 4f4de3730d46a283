"""Gap geometry: anisotropic weights, explicit constants, profiles, norms.

The physical setup is a thin gap between two nearly touching convex bodies.
Near the touching point the gap height is modeled as

    delta(x') = eps + kappa(x'/|x'|) |x'|^m,

where the direction weight on the unit sphere of R^{d-1} is

    kappa(xi) = kappa0 (sum_{i in A} kappa_i xi_i^2)^{m/2}
                + sum_{j in B} kappa_j |xi_j|^m,

for a partition {A, B} of the coordinate indices.  This module owns the
configuration types, the weight and height evaluators, the derived constants
used by the estimates, weighted norms and averages, rounded-cube gap
profiles, and the change of variables that flattens the gap to a slab.

All evaluators are pure and vectorized over trailing point batches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, UnsupportedDimensionError

__all__ = [
    "WeightSpec",
    "DerivedConstants",
    "CubeSpec",
    "CubeProfile",
    "NormSpec",
    "GapProfile",
    "HConditionReport",
    "kappa_weight",
    "derived_constants",
    "delta",
    "delta_gradient",
    "cube_profile",
    "cube_gap_profile",
    "weighted_norm",
    "weighted_average",
    "gap_transform",
    "validate_H_conditions",
    "weight_spec_to_dict",
    "weight_spec_from_dict",
    "load_weight_spec",
]


@dataclass(frozen=True)
class WeightSpec:
    """Direction weight configuration.

    ``kappa`` lists the d-1 coefficients (1-based indices in ``set_a`` and
    ``set_b``).  The two index sets must partition {1, .., d-1}; either may
    be empty.  ``kappa0`` only matters when ``set_a`` is nonempty.
    """

    d: int
    m: float
    kappa0: float
    kappa: tuple
    set_a: frozenset = field(default_factory=frozenset)
    set_b: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "kappa", tuple(float(k) for k in self.kappa))
        object.__setattr__(self, "set_a", frozenset(int(i) for i in self.set_a))
        object.__setattr__(self, "set_b", frozenset(int(j) for j in self.set_b))
        if self.d < 3:
            raise InputError(f"dimension d={self.d} must be >= 3")
        if not self.m >= 2:
            raise InputError(f"convexity index m={self.m} must be >= 2")
        if not self.kappa0 > 0:
            raise InputError("kappa0 must be positive")
        if len(self.kappa) != self.d - 1:
            raise InputError(
                f"need {self.d - 1} kappa coefficients, got {len(self.kappa)}"
            )
        if any(not k > 0 for k in self.kappa):
            raise InputError("all kappa coefficients must be positive")
        full = frozenset(range(1, self.d))
        if self.set_a | self.set_b != full or self.set_a & self.set_b:
            raise InputError(
                "set_a and set_b must partition {1..d-1}: "
                f"got A={sorted(self.set_a)}, B={sorted(self.set_b)}"
            )

    @property
    def idx_a(self) -> np.ndarray:
        return np.array(sorted(i - 1 for i in self.set_a), dtype=int)

    @property
    def idx_b(self) -> np.ndarray:
        return np.array(sorted(j - 1 for j in self.set_b), dtype=int)


@dataclass(frozen=True)
class DerivedConstants:
    """Explicit constants derived from a WeightSpec.

    ``varrho <= kappa(xi) <= theta1`` is the weight sandwich; ``c0`` sizes
    the flipping neighbourhoods and ``cbar0 = 2 c0 (1 + theta1)^{1/m}`` the
    annuli used by oscillation averages.  ``cbar0 <= 1/2`` always holds.
    """

    theta1: float
    theta2: float
    theta3: float
    c0: float
    cbar0: float
    varrho: float


@dataclass(frozen=True)
class CubeSpec:
    """Rounded-cube pair: corner radii r1 (upper body) and r2 (lower)."""

    r1: float
    r2: float
    m: float

    def __post_init__(self):
        if not (self.r1 > 0 and self.r2 > 0):
            raise InputError("cube radii must be positive")
        if not self.m >= 2:
            raise InputError(f"convexity index m={self.m} must be >= 2")


@dataclass(frozen=True)
class NormSpec:
    """Indices (eps, sigma, tau) of the weighted sup norm.

    The norm of a field F is sup |x'|^{-sigma} (eps + |x'|^m)^{tau-1} |F(x')|.
    """

    eps: float
    sigma: float
    tau: float

    def __post_init__(self):
        if self.eps < 0:
            raise InputError("norm eps must be >= 0")


@dataclass(frozen=True)
class GapProfile:
    """Two graph surfaces eps/2 + h1(x') and -eps/2 + h2(x') over a disk.

    ``h1`` and ``h2`` map an (N, k) array of horizontal points to (N,)
    heights, vanish at the origin, and keep h1 - h2 >= 0 on the validity
    disk of radius R0.  ``gamma`` is the Holder exponent of the model
    remainder; ``tau1`` and ``tau2`` bound the slopes and the C^2 size.
    """

    eps: float
    R0: float
    h1: Callable[[np.ndarray], np.ndarray]
    h2: Callable[[np.ndarray], np.ndarray]
    gamma: float
    tau1: float
    tau2: float

    def __post_init__(self):
        if self.eps < 0 or self.R0 <= 0:
            raise InputError("need eps >= 0 and R0 > 0")
        if not 0 < self.gamma < 1:
            raise InputError(f"gamma={self.gamma} must lie in (0, 1)")
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise InputError("tau1 and tau2 must be positive")
        origin = np.zeros((1, 2))
        for name, h in (("h1", self.h1), ("h2", self.h2)):
            v = float(np.asarray(h(origin)).reshape(-1)[0])
            if abs(v) > 1e-12:
                raise InputError(f"{name}(0) = {v!r}, must vanish at the origin")


def _split_components(spec: WeightSpec, x: np.ndarray):
    """x as (..., d-1) -> (A-part quadratic sum, B-part |x_j|^m sum)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.d - 1:
        raise InputError(
            f"points must have {spec.d - 1} components, got {x.shape[-1]}"
        )
    qa = np.zeros(x.shape[:-1])
    sb = np.zeros(x.shape[:-1])
    ia, ib = spec.idx_a, spec.idx_b
    if ia.size:
        qa = np.einsum("...i,i->...", x[..., ia] ** 2, np.asarray(spec.kappa)[ia])
    if ib.size:
        sb = np.einsum(
            "...j,j->...", np.abs(x[..., ib]) ** spec.m, np.asarray(spec.kappa)[ib]
        )
    return qa, sb


def _kappa_unnormalized(spec: WeightSpec, x: np.ndarray) -> np.ndarray:
    """kappa(x/|x|) |x|^m, continuously extended by 0 at the origin."""
    qa, sb = _split_components(spec, x)
    return spec.kappa0 * qa ** (spec.m / 2.0) + sb


def kappa_weight(spec: WeightSpec, xi) -> float | np.ndarray:
    """Evaluate the direction weight at unit vectors xi in R^{d-1}.

    Accepts a single vector or an (N, d-1) batch; every row must be unit
    length within 1e-12.
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    r = np.sqrt(np.sum(xi**2, axis=-1))
    if np.any(np.abs(r - 1.0) > 1e-12):
        worst = float(np.max(np.abs(r - 1.0)))
        raise InputError(f"xi must be a unit vector (|xi| off by {worst:.3e})")
    out = _kappa_unnormalized(spec, xi)
    return float(out) if single else out


def derived_constants(spec: WeightSpec) -> DerivedConstants:
    """Compute the explicit constant pack for a weight.

    Empty index sets follow the usual conventions: empty sums are 0 and an
    empty-set minimum drops out of the outer minimum entirely.
    """
    k = np.asarray(spec.kappa)
    m = spec.m
    ka = k[spec.idx_a]
    kb = k[spec.idx_b]
    sa2 = float(np.sum(ka**2))
    sa4 = float(np.sum(ka**4))
    sb2 = float(np.sum(kb**2))
    sb4 = float(np.sum(kb**4))

    theta1 = math.sqrt(spec.kappa0**2 * sa2 ** (m / 2.0) + sb2)
    theta2 = (spec.kappa0**4 * sa4 * sa2 ** (m - 2.0) + sb4) ** 0.25

    # Lower sandwich bound: L combines the worst coordinate of each family,
    # with a cardinality factor from splitting |xi|^m across the B block.
    card_b = len(spec.set_b)
    mins = []
    if ka.size:
        mins.append(spec.kappa0 * float(np.min(ka)) ** (m / 2.0))
    if kb.size:
        mins.append(float(np.min(kb)))
    lower = (
        2.0 ** (-(m - 2.0) / 2.0)
        * min(2.0 ** (-(m - 2.0) * (card_b - 1) / 2.0), 1.0)
        * min(mins)
    )
    theta3 = lower ** ((1.0 / m) - 1.0)
    varrho = theta3 ** (-m / (m - 1.0))

    c0 = min(
        1.0 / (4.0 * (1.0 + theta1) ** (1.0 / m)),
        1.0 / (2.0**m * m * max(theta2, 1.0) * max(theta3, 1.0)),
    )
    cbar0 = 2.0 * c0 * (1.0 + theta1) ** (1.0 / m)
    return DerivedConstants(
        theta1=theta1, theta2=theta2, theta3=theta3, c0=c0, cbar0=cbar0, varrho=varrho
    )


def delta(spec: WeightSpec, eps: float, x) -> float | np.ndarray:
    """Gap height eps + kappa(x/|x|) |x'|^m; the origin is allowed."""
    if eps < 0:
        raise InputError("eps must be >= 0")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = eps + _kappa_unnormalized(spec, x)
    return float(out) if single else out


def delta_gradient(spec: WeightSpec, x) -> np.ndarray:
    """Closed-form horizontal gradient of the height (eps drops out)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    qa, _ = _split_components(spec, pts)
    k = np.asarray(spec.kappa)
    g = np.zeros_like(pts)
    m = spec.m
    ia, ib = spec.idx_a, spec.idx_b
    if ia.size:
        # d/dx_i of kappa0 * qa^{m/2} with qa = sum kappa_i x_i^2
        fac = spec.kappa0 * (m / 2.0) * qa ** (m / 2.0 - 1.0)
        g[:, ia] = fac[:, None] * 2.0 * k[ia] * pts[:, ia]
    if ib.size:
        g[:, ib] = m * k[ib] * np.abs(pts[:, ib]) ** (m - 1.0) * np.sign(pts[:, ib])
    return g[0] if single else g


@dataclass(frozen=True)
class CubeProfile:
    """Exact rounded-cube gap together with its power-model data."""

    kappabar: float
    gap: Callable[[np.ndarray], np.ndarray]
    remainder_bound: float
    valid_radius: float


def cube_profile(cube: CubeSpec) -> CubeProfile:
    """Exact gap of two rounded cubes and its leading power model.

    The surfaces are level sets sum_i |x_i|^m + |x_d -+ (eps/2 + r_j)|^m
    = r_j^m, so the gap above eps is

        gap(x') = sum_j [ r_j - (r_j^m - s)^{1/m} ],   s = sum_i |x_i|^m.

    The model is kappabar * s with kappabar = (r1^{1-m} + r2^{1-m}) / m,
    and |gap - kappabar * s| <= remainder_bound * |x'|^{2m} holds for
    |x'| <= valid_radius = min(r1, r2) / 2 (Taylor remainder in s).
    """
    m = cube.m
    radii = (cube.r1, cube.r2)
    kappabar = sum(r ** (1.0 - m) for r in radii) / m
    rmin = min(radii)

    def gap(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        s = np.sum(np.abs(x) ** m, axis=-1)
        if np.any(s > rmin**m):
            raise InputError("point outside the rounded-cube chart")
        out = np.zeros_like(s)
        for r in radii:
            out += r - (r**m - s) ** (1.0 / m)
        return out

    # second Taylor coefficient of r(1 - (1 - u)^{1/m}) in u = s/r^m,
    # maximized over u <= 2^{-m}; s <= |x'|^m turns s^2 into |x'|^{2m}
    bound = sum(
        ((m - 1.0) / (2.0 * m**2)) * (r**m * (1.0 - 2.0**-m)) ** (1.0 / m - 2.0)
        for r in radii
    )
    return CubeProfile(
        kappabar=kappabar, gap=gap, remainder_bound=bound, valid_radius=rmin / 2.0
    )


def cube_gap_profile(cube: CubeSpec, eps: float, gamma: float = 0.9) -> GapProfile:
    """Package the rounded-cube surfaces as a GapProfile.

    Slope and C^2 constants come from closed-form bounds on the chart
    |x'| <= min(r1, r2)/2, padded by 5 percent.
    """
    m = cube.m
    rmin = min(cube.r1, cube.r2)
    R0 = rmin / 2.0

    def _surface(r):
        def h(x: np.ndarray) -> np.ndarray:
            x = np.atleast_2d(np.asarray(x, dtype=float))
            s = np.sum(np.abs(x) ** m, axis=-1)
            return r - (r**m - s) ** (1.0 / m)

        return h

    h1 = _surface(cube.r1)
    _h2_pos = _surface(cube.r2)

    def h2(x: np.ndarray) -> np.ndarray:
        return -_h2_pos(x)

    # |grad h_j| <= (r_j^m - s)^{1/m - 1} |x'|^{m-1} and s <= (r_j/2)^m on
    # the chart, so the prefactor is bounded by the depleted-radius power
    tau1 = 1.05 * max(
        (r**m * (1.0 - 2.0**-m)) ** (1.0 / m - 1.0) for r in (cube.r1, cube.r2)
    )
    tau2 = 1.05 * _c2_proxy_bound(h1, h2, R0)
    return GapProfile(eps=eps, R0=R0, h1=h1, h2=h2, gamma=gamma, tau1=tau1, tau2=tau2)


def _c2_proxy_bound(h1, h2, R0: float) -> float:
    """Sampled stand-in for the C^2 norms: sup |h| + |grad h| + |hess h|."""
    rng = np.random.default_rng(7)
    pts = rng.uniform(-R0 / math.sqrt(2.0), R0 / math.sqrt(2.0), size=(400, 2))
    total = 0.0
    for h in (h1, h2):
        vals = np.abs(np.asarray(h(pts)))
        grads = np.linalg.norm(_fd_gradient(h, pts), axis=1)
        hess = _fd_hessian_norm(h, pts)
        total += float(np.max(vals) + np.max(grads) + np.max(hess))
    return total


def _fd_gradient(h, pts: np.ndarray, step: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(pts)
    for k in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[k] = step
        g[:, k] = (np.asarray(h(pts + e)) - np.asarray(h(pts - e))) / (2 * step)
    return g


def _fd_hessian_norm(h, pts: np.ndarray, step: float = 1e-4) -> np.ndarray:
    n, k = pts.shape
    out = np.zeros(n)
    for a in range(k):
        for b in range(k):
            ea = np.zeros(k)
            eb = np.zeros(k)
            ea[a] = step
            eb[b] = step
            d2 = (
                np.asarray(h(pts + ea + eb))
                - np.asarray(h(pts + ea - eb))
                - np.asarray(h(pts - ea + eb))
                + np.asarray(h(pts - ea - eb))
            ) / (4 * step**2)
            out += d2**2
    return np.sqrt(out)


def weighted_norm(values, points, norm: NormSpec, m: float) -> float:
    """Weighted sup norm sup |x'|^{-sigma} (eps + |x'|^m)^{tau-1} |F|.

    ``values`` holds field samples: magnitudes (N,) or vectors (N, k).
    ``points`` gives the sample locations as radii (N,) or coordinates
    (N, k).  Samples must avoid the origin whenever the weight is singular
    there.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise InputError("weighted_norm needs a nonempty sample set")
    mag = np.abs(vals) if vals.ndim == 1 else np.linalg.norm(vals, axis=-1)
    pts = np.asarray(points, dtype=float)
    r = np.abs(pts) if pts.ndim == 1 else np.linalg.norm(pts, axis=-1)
    if r.shape != mag.shape:
        raise InputError("values and points disagree on sample count")
    with np.errstate(divide="ignore", invalid="ignore"):
        w = r ** (-norm.sigma) * (norm.eps + r**m) ** (norm.tau - 1.0) * mag
    if not np.all(np.isfinite(w)):
        raise InputError(
            "weight is singular at a sample point; sample away from the origin"
        )
    return float(np.max(w))


def weighted_average(
    f: Callable[[np.ndarray], np.ndarray],
    spec: WeightSpec,
    rho: float,
    surface: str = "sphere",
    n_theta: int = 2048,
    n_r: int = 64,
) -> float:
    """kappa-weighted mean of f over the circle or disk of radius rho.

    ``f`` receives an (N, 2) array of physical points.  Circle averages use
    the trapezoid rule on a uniform angular grid (spectrally accurate for
    smooth periodic integrands); disk averages add Gauss-Legendre nodes in
    radius.  Only the d=3 geometry is implemented.
    """
    if spec.d != 3:
        raise UnsupportedDimensionError("weighted averages are implemented for d=3")
    if not rho > 0 or not math.isfinite(rho):
        raise InputError(f"rho={rho} out of range")
    if surface not in ("sphere", "ball"):
        raise InputError(f"surface must be 'sphere' or 'ball', got {surface!r}")
    theta = (np.arange(n_theta) + 0.5) * (2 * np.pi / n_theta)
    xi = np.column_stack([np.cos(theta), np.sin(theta)])
    kap = kappa_weight(spec, xi)
    if surface == "sphere":
        fv = np.asarray(f(rho * xi), dtype=float)
        return float(np.sum(kap * fv) / np.sum(kap))
    nodes, wts = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * rho * (nodes + 1.0)
    wr = 0.5 * rho * wts * r  # area element r dr
    pts = r[:, None, None] * xi[None, :, :]
    fv = np.asarray(f(pts.reshape(-1, 2)), dtype=float).reshape(len(r), n_theta)
    num = float(np.einsum("i,ij,j->", wr, fv, kap))
    den = float(np.sum(wr) * np.sum(kap))
    return num / den


def gap_transform(profile: GapProfile, x, delta0: float | None = None):
    """Flatten a gap point to slab coordinates.

    For x = (x', x_d) between the surfaces, returns (y', y_d) with y' = x'
    and

        y_d = 2 delta0 ( (x_d - h2(x') + eps/2) / (eps + h1(x') - h2(x')) - 1/2 ),

    so the bottom surface maps to -delta0, the top to +delta0, and the
    vertical midpoint to 0.  ``delta0`` defaults to half the local gap
    height, which makes the map a pure vertical recentering.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != 3:
        raise InputError("gap_transform expects points (x1, x2, x_d) with d=3")
    xp = pts[:, :2]
    xd = pts[:, 2]
    h1 = np.asarray(profile.h1(xp), dtype=float)
    h2 = np.asarray(profile.h2(xp), dtype=float)
    span = profile.eps + h1 - h2
    lo = -profile.eps / 2.0 + h2
    hi = profile.eps / 2.0 + h1
    tol = 1e-12 * np.maximum(1.0, np.abs(span))
    if np.any(xd < lo - tol) or np.any(xd > hi + tol):
        raise InputError("point lies outside the gap")
    if np.any(span <= 0):
        raise InputError("gap degenerates (eps + h1 - h2 <= 0) at a requested point")
    half = span / 2.0 if delta0 is None else float(delta0)
    yd = 2.0 * half * ((xd - h2 + profile.eps / 2.0) / span - 0.5)
    out = np.column_stack([xp, yd])
    return out[0] if single else out


@dataclass(frozen=True)
class HConditionReport:
    """Sampled verdicts for the slope, C^2, and model-remainder conditions."""

    tau1_fitted: float
    tau1_ok: bool
    c2_proxy: float
    c2_ok: bool
    remainder_constant: float
    remainder_exponent: float
    remainder_ok: bool
    notes: tuple


def validate_H_conditions(
    profile: GapProfile, spec: WeightSpec, samples
) -> HConditionReport:
    """Check a profile against the m-convex structure conditions.

    Report-only: fits the worst slope constant |grad h_j| / |x'|^{m-1}, a
    sampled C^2 proxy, and regresses log|h1 - h2 - model| against log|x'|
    to estimate the remainder exponent (target >= m + gamma).
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[1] != spec.d - 1:
        raise InputError("sample points must live in R^{d-1}")
    r = np.linalg.norm(pts, axis=1)
    if np.any(r > 2 * profile.R0 + 1e-12):
        raise InputError("samples must stay inside the 2*R0 chart")
    keep = r > 1e-8
    pts, r = pts[keep], r[keep]
    notes = []

    slope_ratio = 0.0
    for h in (profile.h1, profile.h2):
        g = np.linalg.norm(_fd_gradient(h, pts), axis=1)
        slope_ratio = max(slope_ratio, float(np.max(g / r ** (spec.m - 1.0))))
    tau1_ok = slope_ratio <= profile.tau1 * (1 + 1e-6)
    if not tau1_ok:
        notes.append(
            f"slope constant {slope_ratio:.6g} exceeds tau1={profile.tau1:.6g}"
        )

    c2 = _c2_proxy_bound(profile.h1, profile.h2, profile.R0)
    c2_ok = c2 <= profile.tau2 * (1 + 1e-6)
    if not c2_ok:
        notes.append(f"C^2 proxy {c2:.6g} exceeds tau2={profile.tau2:.6g}")

    model = _kappa_unnormalized(spec, pts)
    rem = np.abs(
        np.asarray(profile.h1(pts)) - np.asarray(profile.h2(pts)) - model
    )
    gap_scale = float(np.max(np.abs(model))) or 1.0
    if float(np.max(rem)) <= 1e-14 * gap_scale:
        exponent, constant = math.inf, 0.0
        rem_ok = True
        notes.append("remainder vanishes to machine precision")
    else:
        mask = rem > 1e-300
        coef = np.polyfit(np.log(r[mask]), np.log(rem[mask]), 1)
        exponent = float(coef[0])
        constant = float(np.max(rem / r ** (spec.m + profile.gamma)))
        rem_ok = exponent >= spec.m + profile.gamma - 0.05
        if not rem_ok:
            notes.append(
                f"remainder exponent {exponent:.4f} below "
                f"m + gamma = {spec.m + profile.gamma:.4f}"
            )
    return HConditionReport(
        tau1_fitted=slope_ratio,
        tau1_ok=tau1_ok,
        c2_proxy=c2,
        c2_ok=c2_ok,
        remainder_constant=constant,
        remainder_exponent=exponent,
        remainder_ok=rem_ok,
        notes=tuple(notes),
    )


def weight_spec_to_dict(spec: WeightSpec) -> dict:
    return {
        "d": spec.d,
        "m": spec.m,
        "kappa0": spec.kappa0,
        "kappa": list(spec.kappa),
        "setA": sorted(spec.set_a),
        "setB": sorted(spec.set_b),
    }


def weight_spec_from_dict(data: dict) -> WeightSpec:
    try:
        return WeightSpec(
            d=int(data["d"]),
            m=float(data["m"]),
            kappa0=float(data.get("kappa0", 1.0)),
            kappa=tuple(data["kappa"]),
            set_a=frozenset(data.get("setA", [])),
            set_b=frozenset(data.get("setB", [])),
        )
    except KeyError as exc:
        raise InputError(f"weight spec missing key {exc}") from exc


def load_weight_spec(path: str) -> WeightSpec:
    """Read a WeightSpec from a TOML or JSON file (by extension)."""
    if path.endswith(".toml"):
        try:
            import tomllib as toml  # py >= 3.11
        except ImportError:
            import tomli as toml
        with open(path, "rb") as fh:
            data = toml.load(fh)
    else:
        with open(path) as fh:
            data = json.load(fh)
    return weight_spec_from_dict(data.get("weight", data))
