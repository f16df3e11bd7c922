"""The fractional-calculus lemma suite, shared by the CLI and the tests.

Every entry is a :class:`~fracvar.report.CheckReport`. Trend checks run on
the refinement ladder ``n/8, n/4, n/2, n`` (levels below 8 dropped, 2D grids
capped at 256 cells per axis); with fewer than two levels they report
"insufficient levels" and fail.
"""

from __future__ import annotations

import math
from typing import Any, Callable

import numpy as np

from fracvar.domain import BoxDomain, SpatialField
from fracvar.frac1d import (
    Direction,
    Samples1D,
    TimeGrid,
    _gl_sequence,
    as_order,
    caputo_deriv,
    check_composition,
    check_ibp,
    rl_deriv,
)
from fracvar.fracfield import check_div_grad, check_green_riemann
from fracvar.report import CheckReport, trend

MIN_LEVEL = 8
MAX_LEVEL_2D = 256
RIEWE_LEVELS = (512, 1024, 2048)
RIEWE_THRESHOLD = 0.1
IBP_ENFORCE_N = 256
IBP_EXACT = 8.0 / (35.0 * math.sqrt(math.pi))


def ladder(n: int, cap: int | None = None) -> list[int]:
    top = n if cap is None else min(n, cap)
    levels = [top // 8, top // 4, top // 2, top]
    return [m for m in levels if m >= MIN_LEVEL]


def _trend_report(name: str, levels: list[int], norm: str, errors: list[float],
                  floor: float = 0.0, **details: Any) -> CheckReport:
    verdict = trend(errors, floor=floor)
    return CheckReport(name=name, grid_sizes=levels, norms={norm: errors},
                       passed=verdict["passed"], details={**verdict, **details})


def composition_trend(fn: Callable[[np.ndarray], np.ndarray], label: str,
                      variant: str, levels: list[int]) -> CheckReport:
    errors = [check_composition(Samples1D.from_function(TimeGrid(0.0, 1.0, m), fn),
                                variant).norms["sup"] for m in levels]
    return _trend_report(f"composition/{variant}/{label}", levels, "sup", errors)


def riewe_control(levels: tuple[int, ...] = RIEWE_LEVELS,
                  threshold: float = RIEWE_THRESHOLD) -> CheckReport:
    """The mixed backward-RL of forward-Caputo composition applied to ``t``
    must stay away from ``1`` at interior nodes, stably in ``n``. Passing
    means the mixed identity fails as expected."""
    mids, sups = [], []
    for m in levels:
        rep = check_composition(Samples1D.from_function(TimeGrid(0.0, 1.0, m), lambda t: t),
                                "riewe_mixed")
        mids.append(rep.norms["midpoint"])
        sups.append(rep.norms["sup"])
    spread = (max(mids) - min(mids)) / max(mids)
    passed = min(mids) > threshold and spread < 0.05
    return CheckReport(name="riewe_mixed_control", grid_sizes=list(levels),
                       norms={"midpoint": mids, "sup": sups}, passed=passed,
                       details={"threshold": threshold, "relative_spread": spread})


def ibp_canonical(n: int, alpha: float = 0.5, tol: float = 1.0e-3) -> CheckReport:
    """``f = t``, ``g = t(1 - t)`` on ``[0, 1]``; at ``alpha = 1/2`` both sides
    equal ``8 / (35 sqrt(pi))``."""
    grid = TimeGrid(0.0, 1.0, n)
    f = Samples1D.from_function(grid, lambda t: t)
    g = Samples1D.from_function(grid, lambda t: t * (1.0 - t))
    rep = check_ibp(f, g, alpha, tol=tol)
    if alpha == 0.5:
        lhs, rhs = rep.norms["lhs"], rep.norms["rhs"]
        rep.details["exact"] = IBP_EXACT
        rep.details["lhs_error"] = abs(lhs - IBP_EXACT)
        rep.details["rhs_error"] = abs(rhs - IBP_EXACT)
        # closed-form accuracy is a resolution claim; only enforced on fine grids
        if n >= IBP_ENFORCE_N:
            rep.passed = (rep.passed and abs(lhs - IBP_EXACT) <= tol
                          and abs(rhs - IBP_EXACT) <= tol)
        else:
            rep.details["closed_form"] = f"not enforced below n = {IBP_ENFORCE_N}"
    return rep


def caputo_rl_relation(n: int, alpha: float) -> CheckReport:
    """``D^alpha f - cD^alpha f = (t - a)^-alpha f(a) / Gamma(1 - alpha)`` at
    every non-originating node, forward and backward, up to roundoff."""
    grid = TimeGrid(0.0, 1.0, n)
    f = Samples1D.from_function(grid, lambda t: np.exp(t) + np.cos(3.0 * t))
    worst = 0.0
    for direction, origin in ((Direction.FORWARD, 0), (Direction.BACKWARD, n)):
        rl = rl_deriv(f, alpha, direction).values
        cap = caputo_deriv(f, alpha, direction).values
        dist = np.abs(grid.nodes - grid.nodes[origin])
        keep = np.arange(n + 1) != origin
        term = dist[keep] ** (-alpha) / math.gamma(1.0 - alpha) * f.values[origin]
        gap = np.abs(rl[keep] - cap[keep] - term) / np.maximum(1.0, np.abs(rl[keep]))
        worst = max(worst, float(np.max(gap)))
    tol = 16.0 * np.finfo(float).eps
    return CheckReport(name="caputo_rl_relation", grid_sizes=[n],
                       norms={"max_relative_gap": worst}, passed=worst <= tol,
                       details={"tolerance": tol})


def regularity_endpoint(levels: list[int], alpha: float) -> CheckReport:
    """Forward Caputo derivative of a C^1 function at ``t_1, t_2`` tends to 0."""
    errors = []
    for m in levels:
        f = Samples1D.from_function(TimeGrid(0.0, 1.0, m), lambda t: np.exp(t) + np.sin(t))
        d = caputo_deriv(f, alpha).values
        errors.append(float(max(abs(d[1]), abs(d[2]))))
    return _trend_report("regularity_endpoint", levels, "max_t1_t2", errors)


def gl_semigroup(n: int, alpha: float) -> CheckReport:
    """``w(alpha) * w(beta) = w(alpha + beta)`` for ``beta = 1 - alpha`` and
    ``beta = alpha / 2``; the first case is the backward difference."""
    m = min(n, 512)
    worst = 0.0
    for beta in (1.0 - alpha, 0.5 * alpha):
        lhs = np.convolve(_gl_sequence(alpha, m), _gl_sequence(beta, m))[:m + 1]
        worst = max(worst, float(np.max(np.abs(lhs - _gl_sequence(alpha + beta, m)))))
    diff = np.convolve(_gl_sequence(alpha, m), _gl_sequence(1.0 - alpha, m))[:m + 1]
    expected = np.zeros(m + 1)
    expected[:2] = (1.0, -1.0)
    worst = max(worst, float(np.max(np.abs(diff - expected))))
    return CheckReport(name="gl_semigroup", grid_sizes=[m], norms={"max_abs": worst},
                       passed=worst <= 1.0e-12)


def div_grad_suite(n: int) -> list[CheckReport]:
    levels = ladder(n, MAX_LEVEL_2D)
    reports, l1 = [], []
    gamma = (1.0, 2.0)
    exact_ok = bool(levels)
    gl_worst = 0.0
    for m in levels:
        dom = BoxDomain((0.0, 0.0), (1.0, 1.0), (m, m))
        u = SpatialField.from_function(dom, lambda x, y: x ** 2 * y ** 2)
        rep = check_div_grad(u, gamma)
        l1.append(rep.norms["L1_sup"])
        gl_worst = max(gl_worst, rep.norms["GL_sup"])
        exact_ok = exact_ok and rep.passed
    reports.append(CheckReport(
        name="div_grad/GL_exact", grid_sizes=levels, norms={"GL_sup": gl_worst},
        passed=exact_ok, details={} if levels else {"status": "insufficient levels"}))
    reports.append(_trend_report("div_grad/L1_trend", levels, "L1_sup", l1))
    return reports


def _green_pair(dim: int, m: int) -> tuple[SpatialField, list[SpatialField]]:
    dom = BoxDomain((0.0,) * dim, (1.0,) * dim, (m,) * dim)
    if dim == 1:
        u = SpatialField.from_function(dom, lambda x: np.sin(np.pi * x) * (1.0 + x),
                                       dirichlet_zero=True)
        v = [SpatialField.from_function(dom, lambda x: np.exp(x))]
    else:
        u = SpatialField.from_function(
            dom, lambda x, y: np.sin(np.pi * x) * y * (1.0 - y) ** 2, dirichlet_zero=True)
        v = [SpatialField.from_function(dom, lambda x, y: np.exp(x) * y),
             SpatialField.from_function(dom, lambda x, y: np.cos(x * y))]
    return u, v


def green_riemann_trend(n: int, dim: int, alpha: float) -> CheckReport:
    levels = ladder(n, MAX_LEVEL_2D if dim > 1 else None)
    gaps = []
    for m in levels:
        u, v = _green_pair(dim, m)
        gaps.append(check_green_riemann(u, v, alpha).norms["abs_diff"])
    return _trend_report(f"green_riemann/d{dim}", levels, "abs_diff", gaps, floor=1.0e-12)


def run_suite(alpha: float = 0.5, n: int = 2048, dim: int = 2) -> dict[str, Any]:
    """Run every lemma check; ``pass`` is true iff all of them pass."""
    alpha = as_order(alpha)
    if n < 2:
        raise ValueError("n must be at least 2")
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    levels = ladder(n)
    checks: list[CheckReport] = []
    for label, fn in (("t^2", lambda t: t ** 2), ("t^3", lambda t: t ** 3)):
        checks.append(composition_trend(fn, label, "caputo_caputo", levels))
        checks.append(composition_trend(fn, label, "rl_caputo", levels))
    checks.append(riewe_control())
    checks.append(ibp_canonical(max(n, MIN_LEVEL), alpha))
    checks.append(caputo_rl_relation(max(n, MIN_LEVEL), alpha))
    checks.append(regularity_endpoint(levels, alpha))
    checks.append(gl_semigroup(max(n, MIN_LEVEL), alpha))
    checks.extend(div_grad_suite(n))
    for d in range(1, dim + 1):
        checks.append(green_riemann_trend(n, d, alpha))
    return {
        "alpha": alpha, "n": n, "dim": dim,
        "pass": all(c.passed for c in checks),
        "checks": [c.to_dict() for c in checks],
    }
