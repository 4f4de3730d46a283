"""Experiment orchestration: configs, report bundles, CSV/JSON/SVG output.

Each experiment kind dispatches into the owning module, collects numeric
results plus pass/fail verdicts, and writes deterministic artifacts:
report.json is byte-identical for identical config and seed (wall-clock
data goes to meta.json), CSV tables are the source of truth, and figures
are rendered to SVG next to them.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .errors import GapgradError, InputError  # noqa: E402
from .exponents import (  # noqa: E402
    alpha_of_lambda,
    predict_rates,
    shortcut_lambda1,
)
from .geometry import (  # noqa: E402
    CubeSpec,
    WeightSpec,
    cube_gap_profile,
    cube_profile,
    derived_constants,
    kappa_weight,
    validate_H_conditions,
    weight_spec_from_dict,
    weight_spec_to_dict,
)
from .solver import (  # noqa: E402
    RateFit,
    assemble_disk_system,
    fit_loglog,
    gradient_rate_sweep,
    lower_bound_experiment,
    moser_sup_check,
    omega_profile,
    polar_grid,
    solve_disk,
    verify_oscillation_decay,
)
from .spectral import (  # noqa: E402
    assemble_operator,
    circle_grid,
    parity_analysis,
    parity_continuation,
    perturbed_weight_b,
    solve_spectrum,
)

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "ReportBundle",
    "load_config",
    "config_from_dict",
    "run_experiment",
    "emit_plots",
    "fit_loglog",
    "RateFit",
]

matplotlib.rcParams["svg.hashsalt"] = "gapgrad"

KINDS = (
    "constants",
    "exponents",
    "eigensolve",
    "decay",
    "rate_sweep",
    "lower_bound",
    "moser",
    "cube",
)

# per-kind (n_r, n_theta) fallbacks when the config leaves them unset
_GRID_DEFAULTS = {
    "decay": (512, 512),
    "rate_sweep": (None, 64),
    "lower_bound": (512, 128),
    "moser": (128, 64),
}

_TOLERANCE_DEFAULTS = {
    "decay": 0.02,
    "rate_sweep": 0.07,
    "moser": 0.10,
}


def _threads() -> int:
    raw = os.environ.get("GAPGRAD_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    weight: WeightSpec | None = None
    cube: CubeSpec | None = None
    n_r: int | None = None
    n_theta: int | None = None
    R0: float = 1.0
    eps: float = 0.0
    eps_list: tuple = ()
    eps0: float = 0.1
    sigma: float = 0.5
    gamma: float = 0.9
    probe_radius: float = 2.0
    n: int = 2048
    k: int = 6
    seed: int = 0
    tol: float = 1e-10
    tolerance: float | None = None
    output_dir: str = "."

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown experiment kind {self.kind!r}")
        if self.kind == "cube":
            if self.cube is None:
                raise InputError("kind=cube requires a [cube] table")
        elif self.weight is None:
            raise InputError(f"kind={self.kind} requires a [weight] table")
        eps_list = tuple(float(e) for e in self.eps_list)
        if any(e <= 0 for e in eps_list):
            raise InputError("eps_list values must be positive")
        if list(eps_list) != sorted(eps_list):
            raise InputError("eps_list must be sorted ascending")
        object.__setattr__(self, "eps_list", eps_list)
        if self.eps < 0:
            raise InputError("eps must be >= 0")

    def grid_shape(self) -> tuple:
        base = _GRID_DEFAULTS.get(self.kind, (512, 128))
        n_r = self.n_r if self.n_r is not None else base[0]
        n_theta = self.n_theta if self.n_theta is not None else base[1]
        return n_r, n_theta

    def verdict_tolerance(self) -> float | None:
        if self.tolerance is not None:
            return self.tolerance
        return _TOLERANCE_DEFAULTS.get(self.kind)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    weight = data.pop("weight", None)
    if isinstance(weight, dict):
        weight = weight_spec_from_dict(weight)
    cube = data.pop("cube", None)
    if isinstance(cube, dict):
        cube = CubeSpec(
            r1=float(cube["r1"]), r2=float(cube["r2"]), m=float(cube["m"])
        )
    if "eps_list" in data:
        data["eps_list"] = tuple(data["eps_list"])
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    extra = set(data) - known
    if extra:
        raise InputError(f"unknown config keys: {sorted(extra)}")
    return ExperimentConfig(weight=weight, cube=cube, **data)


def load_config(path: str) -> ExperimentConfig:
    """Read an experiment config from TOML (preferred) or JSON."""
    text = Path(path).read_bytes()
    if str(path).endswith(".json"):
        return config_from_dict(json.loads(text.decode()))
    try:
        import tomllib  # py311+
    except ModuleNotFoundError:
        import tomli as tomllib
    return config_from_dict(tomllib.loads(text.decode()))


@dataclass(frozen=True)
class ReportBundle:
    kind: str
    config: dict
    results: dict
    fits: dict
    verdicts: tuple
    provenance: dict
    output_dir: str
    artifacts: tuple = ()

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts)


def _verdict(name, observed, predicted, tolerance, passed, detail=""):
    return {
        "name": name,
        "observed": observed,
        "predicted": predicted,
        "tolerance": tolerance,
        "passed": bool(passed),
        "detail": detail,
    }


def _jsonify(obj):
    """Plain-JSON form: numpy scalars/arrays unwrapped, NaN/inf to None."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        val = float(obj)
        return val if math.isfinite(val) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _config_echo(config: ExperimentConfig) -> dict:
    echo = dataclasses.asdict(config)
    echo["weight"] = (
        weight_spec_to_dict(config.weight) if config.weight is not None else None
    )
    echo["cube"] = (
        {"r1": config.cube.r1, "r2": config.cube.r2, "m": config.cube.m}
        if config.cube is not None
        else None
    )
    return echo


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [f"{v:.16g}" if isinstance(v, float) else v for v in row]
            )


def _fit_dict(fit: RateFit) -> dict:
    return fit.to_dict()


# ---------------------------------------------------------------- kinds


def _run_constants(config: ExperimentConfig):
    spec = config.weight
    consts = derived_constants(spec)
    rng = np.random.default_rng(config.seed)
    if spec.d == 3:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=10000)
        xi = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        xi = rng.standard_normal(size=(10000, spec.d - 1))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    samples = np.asarray(kappa_weight(spec, xi), dtype=float)
    lo, hi = float(samples.min()), float(samples.max())

    results = {
        "theta1": consts.theta1,
        "theta2": consts.theta2,
        "theta3": consts.theta3,
        "c0": consts.c0,
        "cbar0": consts.cbar0,
        "varrho": consts.varrho,
        "kappa_sample_min": lo,
        "kappa_sample_max": hi,
        "sample_count": int(samples.size),
    }
    verdicts = [
        _verdict(
            "sandwich_lower",
            lo,
            consts.varrho,
            0.0,
            lo >= consts.varrho * (1.0 - 1e-12),
            "min sampled kappa >= varrho",
        ),
        _verdict(
            "sandwich_upper",
            hi,
            consts.theta1,
            0.0,
            hi <= consts.theta1 * (1.0 + 1e-12),
            "max sampled kappa <= theta1",
        ),
        _verdict(
            "cbar0_half",
            consts.cbar0,
            0.5,
            0.0,
            consts.cbar0 <= 0.5,
            "cbar0 <= 1/2",
        ),
    ]
    tables = {
        "constants.csv": (
            ("quantity", "value"),
            [(k, float(v)) for k, v in results.items() if k != "sample_count"],
        )
    }
    provenance = {"sample_count": int(samples.size), "seed": config.seed}
    return results, {}, verdicts, provenance, tables


def _run_exponents(config: ExperimentConfig):
    spec = config.weight
    shortcut = shortcut_lambda1(spec)
    if spec.d == 3:
        report = predict_rates(spec, use_shortcut=False, n=min(config.n, 4096))
    else:
        report = predict_rates(spec, use_shortcut=True)
    lam = report.lambda1
    alpha = report.alpha
    identity = alpha * (alpha + spec.d + spec.m - 3.0)

    results = dict(report.to_dict())
    results["shortcut_lambda1"] = shortcut
    verdicts = [
        _verdict(
            "alpha_lambda_identity",
            identity,
            lam,
            1e-12,
            abs(identity - lam) <= 1e-12 * max(1.0, abs(lam)),
            "alpha(alpha + d + m - 3) = lambda1",
        ),
        _verdict(
            "eps_exponent_identity",
            report.gradient_exponent_eps,
            (alpha - 1.0) / spec.m,
            0.0,
            report.gradient_exponent_eps == (alpha - 1.0) / spec.m,
            "gradient exponent in eps equals (alpha - 1)/m",
        ),
    ]
    if shortcut is not None and spec.d == 3:
        verdicts.append(
            _verdict(
                "shortcut_agreement",
                lam,
                shortcut,
                1e-3,
                abs(lam - shortcut) <= 1e-3 * max(1.0, abs(shortcut)),
                "computed lambda1 matches the closed-form shortcut value",
            )
        )
    tables = {
        "exponents.csv": (
            ("quantity", "value"),
            [
                (k, v)
                for k, v in results.items()
                if isinstance(v, (int, float)) and v is not None
            ],
        )
    }
    provenance = {
        "spectral_n": min(config.n, 4096) if spec.d == 3 else None,
        "lambda1_source": report.lambda1_source,
    }
    return results, {}, verdicts, provenance, tables


def _run_eigensolve(config: ExperimentConfig):
    spec = config.weight
    n = min(config.n, 4096)
    k = max(2, config.k)

    lam1 = {}
    spectra = {}
    for size in (n // 4, n // 2, n):
        grid = circle_grid(size)
        K, M = assemble_operator(spec, grid)
        spectra[size] = solve_spectrum(K, M, k=min(k, size), grid=grid)
        lam1[size] = float(spectra[size].eigenvalues[1])
    r1 = (4.0 * lam1[n // 2] - lam1[n // 4]) / 3.0
    r2 = (4.0 * lam1[n] - lam1[n // 2]) / 3.0
    spectrum = spectra[n]

    results = {
        "n": n,
        "eigenvalues": [float(v) for v in spectrum.eigenvalues],
        "multiplicities": list(spectrum.multiplicities),
        "lambda1": lam1[n],
        "lambda1_richardson": r2,
        "richardson_drift": abs(r2 - r1),
        "max_residual": float(np.max(spectrum.residuals)),
    }
    verdicts = [
        _verdict(
            "ground_state_zero",
            float(spectrum.eigenvalues[0]),
            0.0,
            1e-8,
            abs(float(spectrum.eigenvalues[0])) <= 1e-8,
            "lowest eigenvalue is the constant mode at 0",
        ),
        _verdict(
            "eigenresiduals",
            float(np.max(spectrum.residuals)),
            0.0,
            1e-8,
            float(np.max(spectrum.residuals)) <= 1e-8,
            "relative eigenresiduals within solver tolerance",
        ),
        _verdict(
            "richardson_stability",
            abs(r2 - r1),
            0.0,
            1e-6,
            abs(r2 - r1) <= 1e-6 * max(1.0, abs(r2)),
            "extrapolated lambda1 stable across grid levels",
        ),
    ]

    if spectrum.parity is not None:
        flags = parity_analysis(spectrum, 1)
        results["parity_lambda1"] = {str(j): bool(v) for j, v in flags.items()}
        verdicts.append(
            _verdict(
                "odd_sector_occupancy",
                float(sum(flags.values())),
                1.0,
                0.0,
                any(flags.values()),
                "first eigenspace contains an odd coordinate sector",
            )
        )
    else:
        results["parity_lambda1"] = None

    continuation_rows = []
    if not spec.set_a and config.eps0 > 0:
        try:
            b, sup_b = perturbed_weight_b(spec, config.eps0)
            mus = np.linspace(0.0, config.eps0 / 2.0, 6)
            cont = parity_continuation(spec, b, mus, n=min(n, 512))
            results["perturbation_sup"] = sup_b
            results["continuation_interval"] = list(cont.interval)
            for mu, lam, flags, holds, note in cont.entries:
                continuation_rows.append(
                    (
                        float(mu),
                        float(lam) if lam is not None else math.nan,
                        bool(flags.get(1)) if flags else False,
                        bool(flags.get(2)) if flags else False,
                        bool(holds),
                        note,
                    )
                )
            verdicts.append(
                _verdict(
                    "parity_continuation",
                    float(cont.interval[1]),
                    config.eps0 / 2.0,
                    0.0,
                    cont.holds_throughout(),
                    "odd sectors persist for the perturbed weight family",
                )
            )
        except GapgradError as exc:
            results["continuation_note"] = f"skipped: {exc}"

    tables = {
        "eigenvalues.csv": (
            ("index", "lambda", "residual"),
            [
                (i, float(spectrum.eigenvalues[i]), float(spectrum.residuals[i]))
                for i in range(len(spectrum.eigenvalues))
            ],
        ),
        "eigenfunctions.csv": (
            ("theta",) + tuple(f"Y{i}" for i in range(min(4, k))),
            [
                (float(t),)
                + tuple(
                    float(spectrum.eigenfunctions[row, i])
                    for i in range(min(4, k))
                )
                for row, t in enumerate(spectrum.grid.theta_centers)
            ],
        ),
    }
    if continuation_rows:
        tables["continuation.csv"] = (
            ("mu", "lambda1", "odd_xi1", "odd_xi2", "holds", "note"),
            continuation_rows,
        )
    results["eigenfunction_theta"] = [float(t) for t in spectrum.grid.theta_centers]
    results["eigenfunction_columns"] = [
        [float(v) for v in spectrum.eigenfunctions[:, i]]
        for i in range(min(4, k))
    ]
    provenance = {
        "grid_sizes": [n // 4, n // 2, n],
        "max_residual": float(np.max(spectrum.residuals)),
    }
    return results, {}, verdicts, provenance, tables


def _decay_predicted(spec: WeightSpec, n_theta: int) -> tuple:
    grid = circle_grid(n_theta)
    K, M = assemble_operator(spec, grid)
    spectrum = solve_spectrum(K, M, k=2, grid=grid)
    lam1 = float(spectrum.eigenvalues[1])
    return lam1, spectrum.eigenfunctions[:, 1]


def _run_decay(config: ExperimentConfig):
    spec = config.weight
    n_r, n_theta = config.grid_shape()
    lam1, y1 = _decay_predicted(spec, n_theta)
    alpha = alpha_of_lambda(lam1, spec.d, spec.m)

    grid = polar_grid(n_r, n_theta, config.R0)
    system = assemble_disk_system(spec, config.eps, grid, None, y1)
    fld = solve_disk(system, tol=config.tol)
    rho = np.geomspace(0.05 * config.R0, 0.4 * config.R0, 12)
    profile = omega_profile(fld, spec, rho)
    fit = verify_oscillation_decay(profile, predicted_alpha=alpha)
    tol = config.verdict_tolerance()

    results = {
        "eps": config.eps,
        "lambda1": lam1,
        "alpha": alpha,
        "rho": [float(v) for v in profile.rho],
        "omega": [float(v) for v in profile.omega],
        "iterations": fld.iterations,
        "solve_residual": fld.solve_residual,
    }
    verdicts = [
        _verdict(
            "omega_decay_rate",
            fit.slope,
            alpha,
            tol,
            fit.relative_error <= tol,
            f"omega(rho) slope vs alpha(lambda1)={alpha:.8f}",
        )
    ]
    tables = {
        "omega.csv": (
            ("rho", "omega"),
            list(zip(map(float, profile.rho), map(float, profile.omega))),
        )
    }
    provenance = {
        "grid": [n_r, n_theta],
        "iterations": fld.iterations,
        "solve_residual": fld.solve_residual,
    }
    return results, {"omega_decay": fit}, verdicts, provenance, tables


def _run_rate_sweep(config: ExperimentConfig):
    spec = config.weight
    _, n_theta = config.grid_shape()
    eps_list = config.eps_list or tuple(np.geomspace(1e-5, 1e-2, 7))
    computed = predict_rates(spec, use_shortcut=False, n=1024)
    predicted = computed.gradient_exponent_eps
    shortcut = shortcut_lambda1(spec)
    shortcut_target = None
    if shortcut is not None:
        shortcut_target = (
            alpha_of_lambda(shortcut, spec.d, spec.m) - 1.0
        ) / spec.m

    sweep = gradient_rate_sweep(
        spec,
        None,
        eps_list,
        probe_radius=config.probe_radius,
        n_theta=n_theta,
        n_r=config.n_r,
        R0=config.R0,
        tol=config.tol,
        predicted=predicted,
        max_workers=_threads(),
    )
    tol = config.verdict_tolerance()
    results = {
        "predicted_exponent": predicted,
        "shortcut_exponent": shortcut_target,
        "lambda1": computed.lambda1,
        "rows": [
            {
                "eps": float(r[0]),
                "max_gradient": float(r[1]),
                "n_r": int(r[2]),
                "iterations": int(r[3]),
                "out_of_regime": bool(r[4]),
            }
            for r in sweep.rows
        ],
        "any_out_of_regime": sweep.any_out_of_regime,
    }
    verdicts = [
        _verdict(
            "gradient_rate",
            sweep.fit.slope,
            predicted,
            tol,
            sweep.fit.relative_error <= tol,
            "max-gradient slope in eps vs (alpha - 1)/m",
        )
    ]
    tables = {
        "sweep.csv": (
            ("eps", "max_gradient", "n_r", "iterations", "out_of_regime"),
            [
                (float(r[0]), float(r[1]), int(r[2]), int(r[3]), int(r[4]))
                for r in sweep.rows
            ],
        )
    }
    provenance = {
        "n_theta": n_theta,
        "grids": [int(r[2]) for r in sweep.rows],
        "iterations": [int(r[3]) for r in sweep.rows],
    }
    return results, {"gradient_rate": sweep.fit}, verdicts, provenance, tables


def _run_lower_bound(config: ExperimentConfig):
    spec = config.weight
    n_r, n_theta = config.grid_shape()
    grid = polar_grid(n_r, n_theta, config.R0)
    lb = lower_bound_experiment(spec, grid, gamma=config.gamma, tol=config.tol)
    threshold = lb.alpha + config.gamma / 2.0

    results = {
        "c1": lb.c1,
        "c1_stderr": lb.c1_stderr,
        "residual_exponent_mode": lb.residual_exponent,
        "coord_c1": lb.coord_c1,
        "coord_residual_exponent": lb.coord_residual_exponent,
        "degenerate": lb.degenerate,
        "j0": lb.j0,
        "lambda1": lb.lambda1,
        "alpha": lb.alpha,
        "gamma": config.gamma,
        "r": [float(v) for v in lb.r_samples],
        "u_mode": [float(v) for v in lb.u_samples],
        "u_coord": [float(v) for v in lb.coord_u_samples],
    }
    if lb.degenerate:
        verdicts = [
            _verdict(
                "nondegenerate_projection",
                0.0,
                1.0,
                0.0,
                False,
                "boundary data has no odd component; projection vanished",
            )
        ]
    else:
        verdicts = [
            _verdict(
                "c1_positive",
                lb.c1,
                0.0,
                0.0,
                lb.c1 > 0,
                "leading coefficient is positive",
            ),
            _verdict(
                "c1_significant",
                lb.c1 / lb.c1_stderr if lb.c1_stderr > 0 else math.inf,
                10.0,
                0.0,
                lb.c1 >= 10.0 * lb.c1_stderr,
                "leading coefficient exceeds 10x its fit standard error",
            ),
            _verdict(
                "residual_exponent",
                lb.coord_residual_exponent,
                threshold,
                0.0,
                lb.coord_residual_exponent >= threshold,
                "coordinate-projection residual decays faster than "
                "alpha + gamma/2",
            ),
        ]
    tables = {
        "projection.csv": (
            ("r", "u_mode", "u_coord"),
            list(
                zip(
                    map(float, lb.r_samples),
                    map(float, lb.u_samples),
                    map(float, lb.coord_u_samples),
                )
            ),
        )
    }
    provenance = {"grid": [n_r, n_theta], "j0": lb.j0, "lambda1": lb.lambda1}
    return results, {}, verdicts, provenance, tables


def _run_moser(config: ExperimentConfig):
    spec = config.weight
    n_r, n_theta = config.grid_shape()
    grid = polar_grid(n_r, n_theta, config.R0)
    rep = moser_sup_check(
        spec,
        config.eps,
        config.sigma,
        grid,
        tol=config.tol,
        max_workers=_threads(),
    )
    tol = config.verdict_tolerance()
    worst = 0.0
    for _, _, _, ratios, _ in rep.entries:
        for r in ratios:
            worst = max(worst, abs(r - 1.0))

    results = {
        "sigma": config.sigma,
        "eps": config.eps,
        "levels": [list(lv) for lv in rep.levels],
        "entries": [
            {
                "family": name,
                "norm": float(nv),
                "sups": [float(s) for s in sups],
                "ratios": [float(r) for r in ratios],
                "stable": bool(st),
            }
            for name, nv, sups, ratios, st in rep.entries
        ],
        "worst_drift": worst,
    }
    verdicts = [
        _verdict(
            "sup_stability",
            worst,
            0.0,
            tol,
            rep.stable and worst <= tol,
            "sup|v| drift across refinement levels",
        )
    ]
    rows = []
    for name, _, sups, _, _ in rep.entries:
        for (lr, lt), s in zip(rep.levels, sups):
            rows.append((name, int(lr), int(lt), float(s)))
    tables = {"moser.csv": (("family", "n_r", "n_theta", "sup"), rows)}
    provenance = {"levels": [list(lv) for lv in rep.levels]}
    return results, {}, verdicts, provenance, tables


def _run_cube(config: ExperimentConfig):
    cube = config.cube
    prof = cube_profile(cube)
    gap = cube_gap_profile(cube, eps=config.eps, gamma=config.gamma)
    wspec = WeightSpec(
        d=3,
        m=cube.m,
        kappa0=1.0,
        kappa=(prof.kappabar, prof.kappabar),
        set_a=frozenset(),
        set_b=frozenset({1, 2}),
    )
    rng = np.random.default_rng(config.seed)
    # below ~0.05 R0 the exact gap is a difference of near-equal surface
    # heights, so cancellation noise swamps both the FD slope check and
    # the remainder regression
    radii = np.geomspace(0.05 * gap.R0, gap.R0, 200)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=radii.size)
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    hrep = validate_H_conditions(gap, wspec, pts)

    gvals = np.asarray(prof.gap(pts))
    model = np.sum(
        prof.kappabar * np.abs(pts) ** cube.m, axis=1
    )
    resid = np.abs(gvals - model)
    bound_ok = bool(
        np.all(resid <= prof.remainder_bound * radii ** (2.0 * cube.m) + 1e-15)
    )

    results = {
        "kappabar": prof.kappabar,
        "remainder_bound": prof.remainder_bound,
        "valid_radius": prof.valid_radius,
        "tau1": gap.tau1,
        "tau2": gap.tau2,
        "tau1_fitted": hrep.tau1_fitted,
        "c2_proxy": hrep.c2_proxy,
        "remainder_constant": hrep.remainder_constant,
        "remainder_exponent": hrep.remainder_exponent,
        "notes": list(hrep.notes),
        "radius": [float(v) for v in radii],
        "residual": [float(v) for v in resid],
    }
    verdicts = [
        _verdict(
            "slope_condition",
            hrep.tau1_fitted,
            gap.tau1,
            0.0,
            hrep.tau1_ok,
            "fitted slope constant within tau1",
        ),
        _verdict(
            "c2_condition",
            hrep.c2_proxy,
            gap.tau2,
            0.0,
            hrep.c2_ok,
            "sampled C^2 proxy within tau2",
        ),
        _verdict(
            "remainder_exponent",
            hrep.remainder_exponent,
            cube.m + config.gamma,
            0.05,
            hrep.remainder_ok,
            "gap-model remainder decays at least like |x'|^{m+gamma}",
        ),
        _verdict(
            "remainder_bound",
            float(np.max(resid / np.maximum(radii ** (2.0 * cube.m), 1e-300))),
            prof.remainder_bound,
            0.0,
            bound_ok,
            "pointwise remainder within the Taylor bound",
        ),
    ]
    tables = {
        "gap.csv": (
            ("x1", "x2", "radius", "gap", "model", "residual"),
            [
                (
                    float(pts[i, 0]),
                    float(pts[i, 1]),
                    float(radii[i]),
                    float(gvals[i]),
                    float(model[i]),
                    float(resid[i]),
                )
                for i in range(radii.size)
            ],
        )
    }
    provenance = {"sample_count": int(radii.size), "seed": config.seed}
    return results, {}, verdicts, provenance, tables


_DISPATCH = {
    "constants": _run_constants,
    "exponents": _run_exponents,
    "eigensolve": _run_eigensolve,
    "decay": _run_decay,
    "rate_sweep": _run_rate_sweep,
    "lower_bound": _run_lower_bound,
    "moser": _run_moser,
    "cube": _run_cube,
}


def run_experiment(config: ExperimentConfig) -> ReportBundle:
    """Dispatch one experiment, write its artifacts, return the bundle.

    Writes report.json (deterministic), meta.json (timing and environment),
    one or more CSV tables, and SVG figures where the kind has something
    to draw.
    """
    t0 = time.perf_counter()
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    results, fits, verdicts, provenance, tables = _DISPATCH[config.kind](config)

    artifacts = []
    for name, (header, rows) in sorted(tables.items()):
        _write_csv(outdir / name, header, rows)
        artifacts.append(name)

    bundle = ReportBundle(
        kind=config.kind,
        config=_config_echo(config),
        results=_jsonify(results),
        fits={k: _jsonify(_fit_dict(v)) for k, v in fits.items()},
        verdicts=tuple(_jsonify(v) for v in verdicts),
        provenance=_jsonify(provenance),
        output_dir=str(outdir),
    )
    plot_paths = emit_plots(bundle)
    artifacts.extend(Path(p).name for p in plot_paths)
    bundle = dataclasses.replace(bundle, artifacts=tuple(sorted(artifacts)))

    report = {
        "kind": bundle.kind,
        "config": bundle.config,
        "results": bundle.results,
        "fits": bundle.fits,
        "verdicts": list(bundle.verdicts),
        "provenance": bundle.provenance,
        "artifacts": list(bundle.artifacts),
        "passed": bundle.passed,
    }
    if not plot_paths:
        report["figures_note"] = "nothing to plot for this experiment kind"
    with open(outdir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    meta = {
        "elapsed_seconds": time.perf_counter() - t0,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    with open(outdir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return bundle


# ---------------------------------------------------------------- plots


def _loglog_fit_figure(
    path, x, y, fit: dict, xlabel, ylabel, title, guide_label
):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax.loglog(x, y, "o", ms=5, label="measured")
    span = np.geomspace(x.min(), x.max(), 64)
    slope, intercept = fit["slope"], fit["intercept"]
    ax.loglog(
        span,
        np.exp(intercept) * span**slope,
        "-",
        label=f"fit slope {slope:.5f}",
    )
    predicted = fit.get("predicted")
    if predicted is not None and math.isfinite(predicted):
        anchor = y[0] / x[0] ** predicted
        ax.loglog(
            span,
            anchor * span**predicted,
            "--",
            label=f"{guide_label} {predicted:.5f}",
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plots(bundle: ReportBundle) -> tuple:
    """Render the bundle's figures to SVG files; returns the paths.

    Kinds with nothing to draw (constants, exponents) return an empty
    tuple; that is the documented no-op.
    """
    outdir = Path(bundle.output_dir)
    res = bundle.results
    paths = []

    if bundle.kind == "decay" and res.get("rho"):
        p = outdir / "decay.svg"
        _loglog_fit_figure(
            p,
            res["rho"],
            res["omega"],
            bundle.fits["omega_decay"],
            "rho",
            "omega(rho)",
            "Oscillation decay",
            "predicted alpha",
        )
        paths.append(str(p))
    elif bundle.kind == "rate_sweep" and res.get("rows"):
        p = outdir / "sweep.svg"
        rows = res["rows"]
        _loglog_fit_figure(
            p,
            [r["eps"] for r in rows],
            [r["max_gradient"] for r in rows],
            bundle.fits["gradient_rate"],
            "eps",
            "max |grad v|",
            "Gradient blow-up rate",
            "predicted (alpha-1)/m",
        )
        paths.append(str(p))
    elif bundle.kind == "lower_bound" and res.get("r"):
        p = outdir / "projection.svg"
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        r = np.asarray(res["r"], dtype=float)
        u = np.abs(np.asarray(res["u_mode"], dtype=float))
        uc = np.abs(np.asarray(res["u_coord"], dtype=float))
        ax.loglog(r, u, "o", ms=4, label="|U(r)| eigenfunction projection")
        ax.loglog(r, uc, "s", ms=3, label="|U(r)| coordinate projection")
        if not res["degenerate"]:
            span = np.geomspace(r.min(), r.max(), 64)
            ax.loglog(
                span,
                res["c1"] * span ** res["alpha"],
                "-",
                label=f"C1 r^alpha, alpha={res['alpha']:.5f}",
            )
        ax.set_xlabel("r")
        ax.set_ylabel("|U(r)|")
        ax.set_title("Leading-mode projection")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(str(p))
    elif bundle.kind == "moser" and res.get("entries"):
        p = outdir / "moser.svg"
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        levels = [lv[0] for lv in res["levels"]]
        for entry in res["entries"]:
            ax.plot(levels, entry["sups"], "o-", label=entry["family"])
        ax.set_xscale("log", base=2)
        ax.set_xlabel("n_r")
        ax.set_ylabel("sup |v|")
        ax.set_title("Sup-norm stability under refinement")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(str(p))
    elif bundle.kind == "eigensolve" and res.get("eigenfunction_columns"):
        p = outdir / "eigenfunctions.svg"
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        theta = np.asarray(res["eigenfunction_theta"], dtype=float)
        for i, col in enumerate(res["eigenfunction_columns"]):
            lam = res["eigenvalues"][i]
            ax.plot(theta, col, label=f"Y{i}, lambda={lam:.6f}")
        ax.set_xlabel("theta")
        ax.set_ylabel("Y(theta)")
        ax.set_title("Circle eigenfunctions")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(str(p))
    elif bundle.kind == "cube" and res.get("radius"):
        p = outdir / "remainder.svg"
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        r = np.asarray(res["radius"], dtype=float)
        resid = np.asarray(res["residual"], dtype=float)
        mask = resid > 0
        ax.loglog(r[mask], resid[mask], "o", ms=3, label="|gap - model|")
        m = bundle.config["cube"]["m"]
        span = np.geomspace(r.min(), r.max(), 64)
        anchor = res["remainder_bound"]
        ax.loglog(
            span,
            anchor * span ** (2.0 * m),
            "--",
            label=f"bound slope {2.0 * m:g}",
        )
        ax.set_xlabel("|x'|")
        ax.set_ylabel("remainder")
        ax.set_title("Gap model remainder")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(str(p))

    return tuple(paths)
