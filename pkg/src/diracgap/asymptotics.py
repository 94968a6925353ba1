"""Slow-decay eigenvalue density: prediction and convergence experiments.

The predicted density of gap eigenvalues per unit scale c is

    (1 / (a pi)) * integral_0^inf (k(lam2, l0(rho)) - k(lam1, l0(rho))) drho,

where k(., l) is the quasimomentum of the periodic system with constant
coupling l and a is the period.  The integrand vanishes wherever the window
[lam1, lam2] stays inside a gap of the l-coupled system: always on
(0, rho0) from the truncation analysis, and for all rho beyond the point
where |l0| drops under the window's gap margin.  In between it picks up a
square-root kink every time a band edge of the coupled system crosses lam1
or lam2, which is why the quadrature refines adaptively.

The convergence experiment compares N(c) / c from direct counting against
the prediction over an increasing list of scales.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DiracGapError, PreconditionError
from .params import DEFAULT_PARAMS, NumericParams
from .potentials import DiracSystem, PerturbationTemplate
from .floquet import quasimomentum_diff
from .counting import (
    BoundaryCondition,
    CountResult,
    TruncationPlan,
    count_halfline,
    plan_truncation,
)

__all__ = [
    "SupportBracket",
    "DensityPrediction",
    "ConvergenceRow",
    "ConvergenceReport",
    "density_integrand",
    "support_bounds",
    "predicted_density",
    "convergence_experiment",
]

INTEGRAND_TOL = 1e-12


def density_integrand(sys: DiracSystem, template: PerturbationTemplate,
                      lam1: float, lam2: float, rho: float,
                      params: NumericParams | None = None) -> float:
    """k(lam2, l0(rho)) - k(lam1, l0(rho)); nonnegative since k is
    non-decreasing in lambda."""
    if lam2 < lam1:
        raise PreconditionError("need lam1 <= lam2")
    if lam1 == lam2:
        return 0.0
    l = template.l0_scalar(float(rho))
    return quasimomentum_diff(sys, lam1, lam2, l, params)


@dataclass(frozen=True)
class SupportBracket:
    """Certified bracket outside which the integrand vanishes on the scan
    grid; ``empty`` means the scan found no coupling whose bands touch the
    window."""

    lo: float
    hi: float
    empty: bool
    warnings: tuple[str, ...] = ()


def support_bounds(sys: DiracSystem, template: PerturbationTemplate,
                   lam1: float, lam2: float,
                   search: tuple[float, float] = (1e-2, 1e2),
                   params: NumericParams | None = None) -> SupportBracket:
    """Bracket the rho values whose coupling l0(rho) pushes spectrum of the
    coupled periodic system into [lam1, lam2].

    Scans a geometric rho grid (equivalently a geometric coupling grid for
    monotone templates) and refines the outermost transitions by bisection.
    Warns when the integrand is still active at a search boundary.
    """
    params = params or DEFAULT_PARAMS
    lo, hi = float(search[0]), float(search[1])
    if not (0.0 < lo < hi):
        raise PreconditionError("search window must satisfy 0 < lo < hi")
    grid = np.geomspace(lo, hi, params.support_scan_points)
    active = np.array([density_integrand(sys, template, lam1, lam2, float(r), params)
                       > INTEGRAND_TOL for r in grid])
    warnings = []
    if not active.any():
        return SupportBracket(lo=0.0, hi=0.0, empty=True)
    first = int(np.argmax(active))
    last = int(len(grid) - 1 - np.argmax(active[::-1]))
    if first == 0:
        warnings.append("integrand active at the lower search boundary; "
                        "support may extend below it")
    if last == len(grid) - 1:
        warnings.append("integrand active at the upper search boundary; "
                        "support may extend beyond it")

    def refine(r_off: float, r_on: float) -> float:
        for _ in range(48):
            mid = math.sqrt(r_off * r_on)
            if density_integrand(sys, template, lam1, lam2, mid, params) > INTEGRAND_TOL:
                r_on = mid
            else:
                r_off = mid
            if abs(r_on - r_off) <= 1e-12 * r_on:
                break
        return r_off

    lo_star = refine(float(grid[first - 1]), float(grid[first])) if first > 0 else float(grid[0])
    hi_star = (refine(float(grid[last + 1]), float(grid[last]))
               if last < len(grid) - 1 else float(grid[-1]))
    return SupportBracket(lo=lo_star, hi=hi_star, empty=False,
                          warnings=tuple(warnings))


@dataclass(frozen=True)
class DensityPrediction:
    """Predicted eigenvalues per unit scale, with quadrature diagnostics."""

    value: float
    support: tuple[float, float] | None
    nodes: int
    error_estimate: float
    warnings: tuple[str, ...] = ()


def _adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, depth, counter):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    counter[0] += 2
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0, abs(delta) / 15.0
    lv, le = _adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, counter)
    rv, re = _adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, counter)
    return lv + rv, le + re


def predicted_density(sys: DiracSystem, template: PerturbationTemplate,
                      lam1: float, lam2: float,
                      support: SupportBracket | None = None,
                      search: tuple[float, float] = (1e-2, 1e2),
                      params: NumericParams | None = None,
                      panels: int | None = None,
                      max_depth: int = 14) -> DensityPrediction:
    """Adaptive quadrature of the density integrand over its support,
    divided by (period * pi).

    The panel subdivision plus bisection refinement resolves the
    square-root kinks at band-edge crossings; the refinement rule is fixed,
    so the result is deterministic.
    """
    params = params or DEFAULT_PARAMS
    panels = panels or params.quad_panels
    if support is None:
        support = support_bounds(sys, template, lam1, lam2, search, params)
    if support.empty:
        return DensityPrediction(value=0.0, support=None, nodes=0,
                                 error_estimate=0.0, warnings=support.warnings)

    counter = [0]

    def f(rho: float) -> float:
        return density_integrand(sys, template, lam1, lam2, float(rho), params)

    a, b = support.lo, support.hi
    xs = np.linspace(a, b, panels + 1)
    fs = [f(float(x)) for x in xs]
    counter[0] += panels + 1
    coarse = 0.0
    mids = []
    for i in range(panels):
        fm = f(float(0.5 * (xs[i] + xs[i + 1])))
        mids.append(fm)
        coarse += (xs[i + 1] - xs[i]) / 6.0 * (fs[i] + 4.0 * fm + fs[i + 1])
    counter[0] += panels
    tol_total = max(params.quad_rel_tol * abs(coarse), 1e-12)
    total = 0.0
    err = 0.0
    for i in range(panels):
        v, e = _adaptive_simpson(
            f, float(xs[i]), float(xs[i + 1]), fs[i], mids[i], fs[i + 1],
            (xs[i + 1] - xs[i]) / 6.0 * (fs[i] + 4.0 * mids[i] + fs[i + 1]),
            tol_total / panels, max_depth, counter)
        total += v
        err += e
    scale = 1.0 / (sys.period * math.pi)
    return DensityPrediction(value=float(total * scale), support=(float(a), float(b)),
                             nodes=counter[0], error_estimate=float(err * scale),
                             warnings=support.warnings)


@dataclass(frozen=True)
class ConvergenceRow:
    c: float
    count: CountResult

    @property
    def n_over_c(self) -> float:
        return self.count.n / self.c

    @property
    def budget_over_c(self) -> float:
        return self.count.error_budget / self.c

    def ratio(self, predicted: float) -> float | None:
        if predicted == 0.0:
            return None
        return float(self.count.n / (self.c * predicted))


@dataclass(frozen=True)
class ConvergenceReport:
    """One row per scale c, the shared prediction, and a trend verdict
    (absent for single-row sweeps)."""

    rows: tuple[ConvergenceRow, ...]
    prediction: DensityPrediction
    plan: TruncationPlan
    verdict: dict | None
    failures: tuple[tuple[float, str], ...] = ()


def convergence_experiment(sys: DiracSystem, template: PerturbationTemplate,
                           lam1: float, lam2: float, c_list,
                           gap_margin: float,
                           plan: TruncationPlan | None = None,
                           prediction: DensityPrediction | None = None,
                           search: tuple[float, float] = (1e-2, 1e2),
                           params: NumericParams | None = None,
                           acceptance_band: tuple[float, float] = (0.85, 1.15),
                           inner_bc: BoundaryCondition | None = None,
                           outer_bc: BoundaryCondition | None = None,
                           outer_margin: float = 4.0,
                           workers: int = 1) -> ConvergenceReport:
    """Sweep N(c) / c against the predicted density over increasing scales.

    Per-scale numerical failures are collected rather than aborting the
    sweep; rows are always ordered by c.
    """
    params = params or DEFAULT_PARAMS
    cs = [float(c) for c in c_list]
    if not cs:
        raise PreconditionError("c_list must not be empty")
    if any(b <= a for a, b in zip(cs, cs[1:])):
        raise PreconditionError("c_list must be strictly increasing")
    if plan is None:
        plan = plan_truncation(sys, template, lam1, lam2, gap_margin,
                               outer_margin=outer_margin, params=params)
    if cs[0] < plan.c0:
        raise PreconditionError(f"smallest scale {cs[0]} below c0 = {plan.c0}")
    if prediction is None:
        prediction = predicted_density(sys, template, lam1, lam2,
                                       search=search, params=params)

    def one(c: float):
        return count_halfline(sys, template, c, lam1, lam2, plan,
                              inner_bc=inner_bc, outer_bc=outer_bc,
                              params=params)

    rows: list[ConvergenceRow] = []
    failures: list[tuple[float, str]] = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [(c, pool.submit(one, c)) for c in cs]
            for c, fut in futs:
                try:
                    rows.append(ConvergenceRow(c=c, count=fut.result()))
                except DiracGapError as exc:
                    failures.append((c, str(exc)))
    else:
        for c in cs:
            try:
                rows.append(ConvergenceRow(c=c, count=one(c)))
            except DiracGapError as exc:
                failures.append((c, str(exc)))

    verdict = None
    if len(rows) >= 2:
        errs = [float(abs(r.n_over_c - prediction.value)) for r in rows]
        final_ratio = rows[-1].ratio(prediction.value)
        verdict = {
            "abs_errors": errs,
            "abs_error_monotone_decreasing": all(b <= a for a, b in zip(errs, errs[1:])),
            "abs_error_improving": errs[-1] <= errs[0],
            "final_ratio": final_ratio,
            "acceptance_band": [float(acceptance_band[0]), float(acceptance_band[1])],
            "ratio_within_band": (None if final_ratio is None else
                                  bool(acceptance_band[0] <= final_ratio
                                       <= acceptance_band[1])),
        }
    return ConvergenceReport(rows=tuple(rows), prediction=prediction,
                             plan=plan, verdict=verdict,
                             failures=tuple(failures))
