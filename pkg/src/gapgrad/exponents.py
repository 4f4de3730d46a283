"""Closed-form decay and blow-up exponents.

Everything here is arithmetic on the first weighted eigenvalue lambda1 of
the circle problem.  The key quantity is the nonnegative indicial root

    alpha(lambda1) = [-(d+m-3) + sqrt((d+m-3)^2 + 4 lambda1)] / 2,

which drives both predicted gradient rates: |x'|^{alpha-1} for touching
bodies and (eps + |x'|^m)^{(alpha-1)/m} for separation eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, UnsupportedDimensionError
from .geometry import WeightSpec, kappa_weight

__all__ = [
    "ExponentReport",
    "alpha_of_lambda",
    "alpha_pm",
    "beta_of_lambda",
    "shortcut_lambda1",
    "weight_is_constant",
    "predict_rates",
]

BETA_CASES = ("m_greater", "m_equal", "m_less")
LAMBDA1_SOURCES = ("computed", "shortcut_table")


@dataclass(frozen=True)
class ExponentReport:
    """Assembled rate prediction for one weight configuration."""

    d: int
    m: float
    lambda1: float
    alpha: float
    beta: float
    beta_case: str
    gradient_exponent_touching: float
    gradient_exponent_eps: float
    lambda1_source: str

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "m": self.m,
            "lambda1": self.lambda1,
            "alpha": self.alpha,
            "beta": self.beta,
            "beta_case": self.beta_case,
            "gradient_exponent_touching": self.gradient_exponent_touching,
            "gradient_exponent_eps": self.gradient_exponent_eps,
            "lambda1_source": self.lambda1_source,
        }


def _check_dm(d: int, m: float):
    if d < 3:
        raise InputError(f"d={d} must be >= 3")
    if not m >= 2:
        raise InputError(f"m={m} must be >= 2")


def alpha_of_lambda(lambda1: float, d: int, m: float) -> float:
    """Nonnegative root of alpha^2 + (d+m-3) alpha - lambda1 = 0."""
    _check_dm(d, m)
    if lambda1 < 0:
        raise InputError(f"lambda1={lambda1} must be >= 0")
    p = d + m - 3.0
    return (-p + math.sqrt(p * p + 4.0 * lambda1)) / 2.0


def alpha_pm(lambda_k: float, d: int, m: float) -> tuple:
    """Both indicial roots (alpha_minus, alpha_plus), minus <= 0 <= plus."""
    _check_dm(d, m)
    if lambda_k < 0:
        raise InputError(f"lambda_k={lambda_k} must be >= 0")
    p = d + m - 3.0
    disc = math.sqrt(p * p + 4.0 * lambda_k)
    return (-(p + disc) / 2.0, (-p + disc) / 2.0)


def beta_of_lambda(
    lambda1: float, d: int, m: float, eta: float = 1e-6
) -> tuple:
    """Oscillation-decay exponent beta and its branch.

    Returns (beta, case) where case is one of m_greater / m_equal / m_less
    according to the sign of m - (d + 2 alpha - 3).  The borderline case
    admits any exponent below 1; it is reported as 1 - eta so downstream
    consumers get a concrete number, with the branch flag preserving the
    indeterminacy.
    """
    if not 0 < eta < 1:
        raise InputError(f"eta={eta} must lie in (0, 1)")
    alpha = alpha_of_lambda(lambda1, d, m)
    threshold = d + 2.0 * alpha - 3.0
    if abs(m - threshold) <= 1e-12:
        return 1.0 - eta, "m_equal"
    if m > threshold:
        return (2.0 * alpha + d + m - 3.0) / (2.0 * m), "m_greater"
    return 1.0, "m_less"


def _all_close(values) -> bool:
    vals = list(values)
    return all(math.isclose(v, vals[0], rel_tol=1e-12) for v in vals[1:])


def weight_is_constant(spec: WeightSpec, n: int = 4096, tol: float = 1e-12) -> bool:
    """Sampled constancy test for the direction weight."""
    if spec.d == 3:
        theta = (np.arange(n) + 0.5) * (2 * np.pi / n)
        xi = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        rng = np.random.default_rng(0)
        xi = rng.standard_normal((n, spec.d - 1))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    k = kappa_weight(spec, xi)
    return float(np.max(k) - np.min(k)) <= tol * float(np.mean(k))


def shortcut_lambda1(spec: WeightSpec) -> float | None:
    """Tabulated special value lambda1 = d - 2, when the table applies.

    The table is encoded exactly as published: for m = 2 the three
    constant-weight configurations; for m > 2 any nonempty B, or empty B
    with unequal quadratic coefficients.  A sampled constant-weight check
    backstops the remaining configurations (a constant weight always has
    lambda1 = d - 2).  Returns None when no tabulated value applies.

    Caution: the m > 2 rows are reproduced as published, but for weights
    that are genuinely nonconstant on the sphere the computed spectrum
    disagrees with the tabulated value (see the eigensolver tests); reports
    carry a lambda1_source tag so the provenance is always visible.
    """
    full = frozenset(range(1, spec.d))
    a, b = spec.set_a, spec.set_b
    kap = spec.kappa
    target = float(spec.d - 2)
    if spec.m == 2:
        if not b and _all_close(kap[i - 1] for i in a):
            return target
        if b == full and _all_close(kap[j - 1] for j in b):
            return target
        if (
            b
            and b != full
            and _all_close(
                [spec.kappa0 * kap[i - 1] for i in a] + [kap[j - 1] for j in b]
            )
        ):
            return target
    else:
        if b:
            return target
        if not _all_close(kap[i - 1] for i in a):
            return target
    if weight_is_constant(spec):
        return target
    return None


def predict_rates(
    spec: WeightSpec,
    lambda1_override: float | None = None,
    eta: float = 1e-6,
    n: int = 2048,
    use_shortcut: bool = True,
) -> ExponentReport:
    """Full exponent report for a weight.

    lambda1 is taken from, in order: the explicit override (tagged
    computed), the special-value table when it applies, or a circle
    eigensolve at resolution n (d = 3 only).  ``use_shortcut=False`` skips
    the table, forcing the eigensolve.
    """
    if lambda1_override is not None:
        if lambda1_override < 0:
            raise InputError("lambda1_override must be >= 0")
        lam, source = float(lambda1_override), "computed"
    else:
        shortcut = shortcut_lambda1(spec) if use_shortcut else None
        if shortcut is not None:
            lam, source = shortcut, "shortcut_table"
        elif spec.d == 3:
            from .spectral import assemble_operator, circle_grid, solve_spectrum

            grid = circle_grid(n)
            k_mat, m_mat = assemble_operator(spec, grid)
            lam = float(solve_spectrum(k_mat, m_mat, k=2, grid=grid).eigenvalues[1])
            source = "computed"
        else:
            raise UnsupportedDimensionError(
                "no sphere eigensolver for d > 3; pass lambda1_override"
            )
    alpha = alpha_of_lambda(lam, spec.d, spec.m)
    beta, case = beta_of_lambda(lam, spec.d, spec.m, eta=eta)
    return ExponentReport(
        d=spec.d,
        m=spec.m,
        lambda1=lam,
        alpha=alpha,
        beta=beta,
        beta_case=case,
        gradient_exponent_touching=alpha - 1.0,
        gradient_exponent_eps=(alpha - 1.0) / spec.m,
        lambda1_source=source,
    )
