"""Eigenvalue counting by phase shooting.

A separated boundary condition u1 sin(beta) + u2 cos(beta) = 0 pins the
phase angle to beta mod pi, so eigenvalues of the regular problem on [a, b]
are exactly the lambda with theta(b; lambda) == beta_right (mod pi), where
theta is shot from theta(a) = beta_left.  Since theta(b; lambda) is strictly
increasing in lambda, the count on a half-open window (lam1, lam2] is the
number of lattice points beta_right + j pi inside (theta(b; lam1),
theta(b; lam2)] - an integer obtained from two shots.

For the perturbed half-line operator the domain is truncated to
[c rho0, c P0 margin] in the original variable.  The inner cut is placed
where the squared coupling dominates (l0**2 - |l0'|/c0 above a threshold
set by the potential bound and the window), which keeps the discarded inner
region free of spectrum in the window; the tail beyond the outer cut
contributes at most 2.  Each cut costs at most 2 in the count, which is
what ``error_budget`` records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .params import DEFAULT_PARAMS, NumericParams
from .potentials import DiracSystem, PerturbationTemplate, INVERSE_POWER
from .integrate import propagate_prufer, prufer_angles
from .floquet import band_edges

__all__ = [
    "BoundaryCondition",
    "CountResult",
    "TruncationPlan",
    "LengthSweepRow",
    "SplitCheck",
    "shoot_angle",
    "shoot_angles",
    "count_interval",
    "count_length_sweep",
    "plan_truncation",
    "count_halfline",
    "split_count_check",
]

ENDPOINT_TOL = 1e-9


@dataclass(frozen=True)
class BoundaryCondition:
    """Separated condition u1 sin(beta) + u2 cos(beta) = 0, i.e. the phase
    angle equals beta mod pi at the endpoint."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % math.pi)

    @classmethod
    def u2_zero(cls) -> "BoundaryCondition":
        return cls(0.0)

    @classmethod
    def sum_zero(cls) -> "BoundaryCondition":
        """u1 + u2 = 0, the inner condition used at the singular-side cut."""
        return cls(math.pi / 4.0)


@dataclass(frozen=True)
class CountResult:
    """Eigenvalue count on a window with its rigorous bookkeeping.

    ``error_budget`` is the worst-case deviation from the untruncated count:
    2 per domain cut plus 2 for the discarded tail (half-line counts), plus
    1 per endpoint-ambiguity flag.  ``theta1``/``theta2`` are the shot
    angles at the right endpoint, kept as diagnostics.
    """

    n: int
    lam1: float
    lam2: float
    a: float
    b: float
    error_budget: int
    theta1: float
    theta2: float
    warnings: tuple[str, ...] = ()
    c: float | None = None
    r_inner: float | None = None
    r_outer: float | None = None


def shoot_angle(sys: DiracSystem, a: float, b: float,
                bc_left: BoundaryCondition, lam: float, l=None,
                params: NumericParams | None = None) -> float:
    """Unwrapped phase at b for the solution starting at the left boundary
    angle; strictly increasing in lam."""
    if not b > a:
        raise PreconditionError("need a < b")
    return propagate_prufer(sys, lam, bc_left.angle, a, b, l=l, params=params).theta


def shoot_angles(sys: DiracSystem, a: float, b: float,
                 bc_left: BoundaryCondition, lams, l=None,
                 params: NumericParams | None = None) -> np.ndarray:
    """Vectorised shooting over a lambda grid."""
    if not b > a:
        raise PreconditionError("need a < b")
    return prufer_angles(sys, lams, bc_left.angle, a, b, l=l, params=params)


def _lattice_count(theta1: float, theta2: float, beta: float):
    """Lattice points beta + j pi in (theta1, theta2], plus endpoint flags."""
    n = math.floor((theta2 - beta) / math.pi) - math.floor((theta1 - beta) / math.pi)
    warnings = []
    flags = 0
    for label, th in (("lam1", theta1), ("lam2", theta2)):
        d = (th - beta) / math.pi
        if abs(d - round(d)) * math.pi < ENDPOINT_TOL:
            flags += 1
            warnings.append(
                f"shot angle at {label} within {ENDPOINT_TOL} of the target "
                f"lattice: count ambiguous by 1 at this endpoint")
    if n < 0:
        warnings.append("shot angle decreased across the window; count clamped to 0")
        n = 0
    return n, flags, warnings


def count_interval(sys: DiracSystem, a: float, b: float,
                   bc_left: BoundaryCondition, bc_right: BoundaryCondition,
                   lam1: float, lam2: float, l=None,
                   params: NumericParams | None = None) -> CountResult:
    """Count eigenvalues of the regular problem on [a, b] in (lam1, lam2]."""
    if not b > a:
        raise PreconditionError("need a < b")
    if lam2 < lam1:
        raise PreconditionError("need lam1 <= lam2")
    if (sys.potential.is_piecewise
            and not callable(l if l is not None else sys.coupling)):
        th = shoot_angles(sys, a, b, bc_left, np.array([lam1, lam2]), l, params)
        theta1, theta2 = float(th[0]), float(th[1])
    else:
        theta1 = shoot_angle(sys, a, b, bc_left, lam1, l, params)
        theta2 = shoot_angle(sys, a, b, bc_left, lam2, l, params)
    n, flags, warnings = _lattice_count(theta1, theta2, bc_right.angle)
    return CountResult(n=n, lam1=lam1, lam2=lam2, a=a, b=b,
                       error_budget=flags, theta1=theta1, theta2=theta2,
                       warnings=tuple(warnings))


@dataclass(frozen=True)
class LengthSweepRow:
    length: float
    result: CountResult

    @property
    def ratio(self) -> float:
        return self.result.n / self.length


def count_length_sweep(sys: DiracSystem, l: float, bc: BoundaryCondition,
                     lam1: float, lam2: float, lengths,
                     a0: float = 0.0,
                     params: NumericParams | None = None) -> list[LengthSweepRow]:
    """Counts per unit length on growing intervals with fixed separated
    boundary conditions; the ratios approach (k(lam2) - k(lam1)) / (a pi)."""
    rows = []
    for L in lengths:
        res = count_interval(sys, a0, a0 + float(L), bc, bc, lam1, lam2, l, params)
        rows.append(LengthSweepRow(length=float(L), result=res))
    return rows


@dataclass(frozen=True)
class TruncationPlan:
    """Domain cuts for the half-line count in scaled units.

    The inner criterion l0**2 - |l0'| / c0 >= threshold holds on (0, rho0]
    (grid-certified); |l0| < delta_inf holds beyond P0.  c0 = C + 1 with C
    the certified decay-regularity constant, and counts require c >= c0.
    """

    rho0: float
    P0: float
    outer_margin: float
    threshold: float
    c0: float
    delta_inf: float
    C: float

    def __post_init__(self):
        if not self.rho0 < self.P0:
            raise PreconditionError("inner cut must lie below the outer cut")

    @property
    def cuts(self) -> int:
        return 2 if self.rho0 > 0.0 else 1


def plan_truncation(sys: DiracSystem, template: PerturbationTemplate,
                    lam1: float, lam2: float, gap_margin: float,
                    C: float | None = None, outer_margin: float = 4.0,
                    rho_hat: float = 1.0,
                    params: NumericParams | None = None) -> TruncationPlan:
    """Certify the truncation cuts for counting in [lam1, lam2].

    Preconditions: the decay-regularity check passes (C finite), and
    [lam1 - gap_margin, lam2 + gap_margin] lies inside a gap of the
    unperturbed system with 0 < gap_margin < 1 and
    gap_margin < (lam2 - lam1) / 2.
    """
    params = params or DEFAULT_PARAMS
    if lam2 <= lam1:
        raise PreconditionError("need lam1 < lam2")
    if not (0.0 < gap_margin < 1.0 and gap_margin < 0.5 * (lam2 - lam1)):
        raise PreconditionError(
            "gap margin must lie in (0, 1) and below half the window width")
    if C is None:
        from .potentials import validate_template
        report = validate_template(template, rho_min=1e-6, rho_hat=rho_hat)
        if not report.passes:
            raise PreconditionError(
                "template fails the decay-regularity check; no finite constant")
        C = report.C_estimate
    C_up = float(math.ceil(C - 1e-9))
    c0 = C_up + 1.0

    pad = gap_margin + 0.25 * (lam2 - lam1) + 0.05
    bands = band_edges(sys, 0.0, (lam1 - pad, lam2 + pad), params, anchor=False)
    if bands.gap_containing(lam1 - gap_margin, lam2 + gap_margin) is None:
        raise PreconditionError(
            f"[{lam1}, {lam2}] widened by {gap_margin} is not inside a spectral "
            f"gap of the unperturbed system")

    threshold = (sys.potential.sup_norm + max(abs(lam1), abs(lam2)) + 1.0) ** 2

    grid = np.geomspace(1e-8, rho_hat, 4096)
    g = template.l0(grid) ** 2 - np.abs(template.l0_prime(grid)) / c0 - threshold
    bad = np.nonzero(g < 0.0)[0]
    if bad.size == 0:
        rho0 = float(grid[-1])
    elif bad[0] == 0:
        if template.singular_at_zero:
            raise PreconditionError(
                "no inner cut certifies the threshold in the searched range")
        rho0 = 0.0
    else:
        rho0 = float(grid[bad[0] - 1])

    delta = float(gap_margin)
    if template.kind == INVERSE_POWER:
        P0 = delta ** (-1.0 / template.beta)
    else:
        if abs(template.table_values[-1]) >= delta:
            raise PreconditionError(
                "tabulated template does not decay below the gap margin")
        rhos = np.asarray(template.table_rho)
        above = np.nonzero(np.abs(np.asarray(template.table_values)) >= delta)[0]
        P0 = float(rhos[above[-1] + 1]) if above.size else max(1e-3, 2.0 * rho0)
    P0 = max(P0, rho0 * (1.0 + 1e-9))
    return TruncationPlan(rho0=rho0, P0=P0, outer_margin=float(outer_margin),
                          threshold=threshold, c0=c0, delta_inf=delta, C=float(C))


def count_halfline(sys: DiracSystem, template: PerturbationTemplate, c: float,
                   lam1: float, lam2: float, plan: TruncationPlan,
                   inner_bc: BoundaryCondition | None = None,
                   outer_bc: BoundaryCondition | None = None,
                   params: NumericParams | None = None) -> CountResult:
    """Count eigenvalues of the half-line operator with coupling l0(r/c),
    restricted to [c rho0, c P0 margin] with the u1 + u2 = 0 inner condition
    by default and a fixed separated outer condition."""
    if c < plan.c0:
        raise PreconditionError(f"need c >= c0 = {plan.c0} (got {c})")
    if lam2 < lam1:
        raise PreconditionError("need lam1 <= lam2")
    inner_bc = inner_bc or BoundaryCondition.sum_zero()
    outer_bc = outer_bc or BoundaryCondition.u2_zero()
    r_in = c * plan.rho0
    r_out = c * plan.P0 * plan.outer_margin

    if template.kind == INVERSE_POWER:
        beta = template.beta
        inv_c = 1.0 / c

        def profile(r: float) -> float:
            return (r * inv_c) ** (-beta)
    else:
        def profile(r: float) -> float:
            return template.l0_scalar(r / c)

    theta1 = propagate_prufer(sys, lam1, inner_bc.angle, r_in, r_out,
                              l=profile, params=params).theta
    theta2 = propagate_prufer(sys, lam2, inner_bc.angle, r_in, r_out,
                              l=profile, params=params).theta
    n, flags, warnings = _lattice_count(theta1, theta2, outer_bc.angle)
    budget = 2 * plan.cuts + 2 + flags
    return CountResult(n=n, lam1=lam1, lam2=lam2, a=r_in, b=r_out,
                       error_budget=budget, theta1=theta1, theta2=theta2,
                       warnings=tuple(warnings), c=c, r_inner=r_in, r_outer=r_out)


@dataclass(frozen=True)
class SplitCheck:
    """Both sides of the splitting inequality |sum_j N_j - N| <= 2 (n + 1)
    for a partition with n interior cut points."""

    lhs: int
    bound: int
    ok: bool
    whole: CountResult
    parts: tuple[CountResult, ...]


def split_count_check(sys: DiracSystem, a: float, b: float, cut_points,
                      lam1: float, lam2: float, l=None,
                      bc_left: BoundaryCondition | None = None,
                      bc_right: BoundaryCondition | None = None,
                      cut_bc: BoundaryCondition | None = None,
                      params: NumericParams | None = None) -> SplitCheck:
    """Compare the direct count with the sum over a partition; imposing a
    separated condition at each interior cut moves the count by at most 2
    per cut point."""
    bc_left = bc_left or BoundaryCondition.u2_zero()
    bc_right = bc_right or BoundaryCondition.u2_zero()
    cut_bc = cut_bc or BoundaryCondition.u2_zero()
    cuts = sorted(float(x) for x in cut_points)
    if any(not a < x < b for x in cuts):
        raise PreconditionError("cut points must lie strictly inside (a, b)")
    whole = count_interval(sys, a, b, bc_left, bc_right, lam1, lam2, l, params)
    bounds = [a] + cuts + [b]
    parts = []
    for i in range(len(bounds) - 1):
        bl = bc_left if i == 0 else cut_bc
        br = bc_right if i == len(bounds) - 2 else cut_bc
        parts.append(count_interval(sys, bounds[i], bounds[i + 1], bl, br,
                                    lam1, lam2, l, params))
    lhs = abs(sum(p.n for p in parts) - whole.n)
    bound = 2 * (len(cuts) + 1)
    return SplitCheck(lhs=lhs, bound=bound, ok=lhs <= bound,
                      whole=whole, parts=tuple(parts))
