"""Band analysis of the constant-coupling periodic system.

The discriminant D(lam) is the trace of the one-period transfer matrix.
|D| < 2 marks stability intervals (bands, all solutions bounded), |D| > 2
instability intervals (gaps); the real line splits into alternating runs of
the two because D is analytic.  The quasimomentum k is the continuous
non-decreasing function with

    D = 2 cos k        on bands,
    k  = n pi          on the closure of the n-th gap,

normalised so that k / period is the asymptotic growth rate of the phase
angle (the rotation number).  Two structural facts pin the labelling down
locally and make differences k(lam2) - k(lam1) independent of any global
anchor:

* the sign of D inside the n-th gap is (-1)**n, so every gap's parity is
  known from D alone;
* D is strictly monotone across each band, so the parity of the gap a band
  runs into is known from the local slope.

Absolute indices are fixed once per structure by snapping a moderately long
rotation-number estimate onto the lattice of admissible values; parity makes
adjacent candidates 2 pi apart, so the snap only needs the estimate to be
accurate to within pi.

Closed (degenerate) gaps, where D touches +-2 without crossing, are detected
by refining the interior extrema of D and are reported as warnings; the gap
label still increments across them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import PreconditionError
from .params import DEFAULT_PARAMS, NumericParams
from .potentials import DiracSystem
from .integrate import (
    TransferMatrix,
    one_period_matrices,
    propagate_prufer,
    prufer_angles,
    solution_samples,
    transfer_matrix,
)

__all__ = [
    "Edge",
    "BandInterval",
    "BandStructure",
    "FloquetData",
    "discriminant",
    "discriminant_grid",
    "band_edges",
    "quasimomentum",
    "quasimomentum_diff",
    "rotation_number",
    "rotation_numbers",
    "floquet_solution",
]

BAND = "band"
GAP = "gap"


def discriminant(sys: DiracSystem, lam: float, l: float = None,
                 params: NumericParams | None = None) -> float:
    """Trace of the one-period transfer matrix at constant coupling."""
    l = _const_coupling(sys, l)
    M = one_period_matrices(sys, np.array([float(lam)]), l, params)
    return float(M[0, 0, 0] + M[0, 1, 1])


def discriminant_grid(sys: DiracSystem, lams, l: float = None,
                      params: NumericParams | None = None) -> np.ndarray:
    l = _const_coupling(sys, l)
    M = one_period_matrices(sys, np.asarray(lams, dtype=float), l, params)
    return M[:, 0, 0] + M[:, 1, 1]


def _const_coupling(sys: DiracSystem, l) -> float:
    if l is None:
        l = sys.coupling
    if not isinstance(l, (int, float, np.floating)):
        raise PreconditionError("band analysis requires a constant coupling")
    return float(l)


def rotation_number(sys: DiracSystem, lam: float, l: float = None,
                    n_periods: int = 1000,
                    params: NumericParams | None = None) -> float:
    """Average phase advance per period, (theta(n a) - theta(0)) / n.

    Converges to the quasimomentum with O(1/n) error; constant nearly
    everywhere inside gaps, where it equals an integer multiple of pi.
    """
    if n_periods < 1:
        raise PreconditionError("n_periods must be >= 1")
    l = _const_coupling(sys, l)
    st = propagate_prufer(sys, lam, 0.0, 0.0, n_periods * sys.period, l=l,
                          params=params)
    return st.theta / n_periods


def rotation_numbers(sys: DiracSystem, lams, l: float = None,
                     n_periods: int = 1000,
                     params: NumericParams | None = None) -> np.ndarray:
    """Vectorised :func:`rotation_number` over a lambda grid."""
    if n_periods < 1:
        raise PreconditionError("n_periods must be >= 1")
    l = _const_coupling(sys, l)
    th = prufer_angles(sys, np.asarray(lams, dtype=float), 0.0, 0.0,
                       n_periods * sys.period, l=l, params=params)
    return th / n_periods


@dataclass(frozen=True)
class Edge:
    lam: float
    disc_value: float  # +2.0 or -2.0
    degenerate: bool = False


@dataclass(frozen=True)
class BandInterval:
    lo: float
    hi: float
    kind: str   # "band" or "gap"; degenerate gaps have lo == hi
    n: int      # gap index; for a band, the index of the gap at its upper edge

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class BandStructure:
    """Ordered edge/interval decomposition of a window with gap labels.

    When ``anchored`` the labels are absolute (k == n pi on gap n in the
    rotation-number normalisation); otherwise they are parity-correct up to
    a common even shift, which leaves all differences of k intact.
    """

    sys: DiracSystem
    coupling: float
    window: tuple[float, float]
    edges: tuple[Edge, ...]
    items: tuple[BandInterval, ...]
    anchored: bool
    warnings: tuple[str, ...]
    params: NumericParams

    def interval_at(self, lam: float) -> BandInterval:
        lo, hi = self.window
        if not (lo - 1e-12 <= lam <= hi + 1e-12):
            raise PreconditionError(f"lambda {lam} outside analysed window {self.window}")
        for it in self.items:
            if it.lo - 1e-12 <= lam <= it.hi + 1e-12 and it.width > 0:
                return it
        # fall back to the nearest degenerate item
        best = min(self.items, key=lambda it: min(abs(lam - it.lo), abs(lam - it.hi)))
        return best

    def gap_containing(self, lam1: float, lam2: float = None) -> BandInterval | None:
        """The positive-width gap containing [lam1, lam2], if any."""
        lam2 = lam1 if lam2 is None else lam2
        for it in self.items:
            if it.kind == GAP and it.width > 0 and it.lo <= lam1 and lam2 <= it.hi:
                return it
        return None

    def k(self, lam: float, disc: float | None = None) -> float:
        """Quasimomentum at lam (relative labels if not anchored)."""
        it = self.interval_at(lam)
        if it.kind == GAP:
            return it.n * math.pi
        if disc is None:
            disc = discriminant(self.sys, lam, self.coupling, self.params)
        a = math.acos(min(1.0, max(-1.0, 0.5 * disc)))
        if it.n % 2 == 0:
            return it.n * math.pi - a
        return (it.n - 1) * math.pi + a

    def k_grid(self, lams, disc=None) -> np.ndarray:
        lams = np.asarray(lams, dtype=float)
        if disc is None:
            disc = discriminant_grid(self.sys, lams, self.coupling, self.params)
        return np.array([self.k(float(x), float(d)) for x, d in zip(lams, disc)])


def _refine_extremum(f, lo: float, hi: float, maximize: bool):
    sgn = -1.0 if maximize else 1.0
    res = minimize_scalar(lambda t: sgn * f(t), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.x), float(sgn * res.fun)


def band_edges(sys: DiracSystem, l: float, lam_window: tuple[float, float],
               params: NumericParams | None = None,
               anchor: bool = True) -> BandStructure:
    """Locate all crossings and touchings of D with +-2 inside the window and
    label the resulting band/gap decomposition."""
    params = params or DEFAULT_PARAMS
    l = _const_coupling(sys, l)
    lo, hi = float(lam_window[0]), float(lam_window[1])
    if not (hi > lo and math.isfinite(lo) and math.isfinite(hi)):
        raise PreconditionError("need a finite window with lam_lo < lam_hi")
    warnings: list[str] = []

    n_scan = max(int(math.ceil((hi - lo) * params.edge_scan_per_unit)), 16) + 1
    grid = np.linspace(lo, hi, n_scan)
    disc = discriminant_grid(sys, grid, l, params)

    def dfun(t: float) -> float:
        return discriminant(sys, float(t), l, params)

    edges: list[Edge] = []
    for target in (2.0, -2.0):
        g = disc - target
        for i in range(n_scan - 1):
            if g[i] == 0.0:
                edges.append(Edge(float(grid[i]), target))
            elif g[i] * g[i + 1] < 0.0:
                root = brentq(lambda t: dfun(t) - target, grid[i], grid[i + 1],
                              xtol=params.edge_xtol)
                edges.append(Edge(float(root), target))
    if disc[-1] == 2.0 or disc[-1] == -2.0:
        edges.append(Edge(float(grid[-1]), float(np.sign(disc[-1]) * 2.0)))

    # rescue pass: interior extrema of D close to +-2 hide touchings, narrow
    # gaps or narrow bands that the sign scan cannot see
    rescue_window = 0.5
    for i in range(1, n_scan - 1):
        d_prev, d_here, d_next = disc[i - 1], disc[i], disc[i + 1]
        is_max = d_here >= d_prev and d_here >= d_next
        is_min = d_here <= d_prev and d_here <= d_next
        if not (is_max or is_min):
            continue
        if abs(abs(d_here) - 2.0) > rescue_window:
            continue
        x_star, d_star = _refine_extremum(dfun, float(grid[i - 1]), float(grid[i + 1]),
                                          maximize=is_max)
        target = 2.0 if d_star > 0.0 else -2.0
        from_band_side = (is_max and target > 0.0) or (is_min and target < 0.0)
        overshoot = (d_star - target) if is_max else (target - d_star)
        if overshoot > params.degen_tol:
            # extremum pokes past the line: a pair of nearby crossings
            # (extrema moving away from the line produce no sign change and
            # are ignored)
            added = 0
            for a, b in ((float(grid[i - 1]), x_star), (x_star, float(grid[i + 1]))):
                fa, fb = dfun(a) - target, dfun(b) - target
                if fa * fb < 0.0:
                    root = brentq(lambda t: dfun(t) - target, a, b,
                                  xtol=params.edge_xtol)
                    edges.append(Edge(float(root), target))
                    added += 1
            if added:
                warnings.append(
                    f"narrow {'gap' if from_band_side else 'band'} near "
                    f"lambda={x_star:.9g} resolved by extremum refinement")
        elif overshoot > -params.degen_tol:
            if from_band_side:
                # touches the line without crossing: closed (degenerate) gap
                edges.append(Edge(x_star, target, degenerate=True))
                warnings.append(
                    f"degenerate (closed) gap at lambda={x_star:.9g}, D touching "
                    f"{target:+.0f}")
            else:
                warnings.append(
                    f"unresolved edge: D grazes {target:+.0f} from the gap side "
                    f"near lambda={x_star:.9g}")

    # dedupe and order
    edges.sort(key=lambda e: e.lam)
    cleaned: list[Edge] = []
    min_sep = max(10.0 * params.edge_xtol, 1e-13 * max(1.0, abs(lo), abs(hi)))
    for e in edges:
        if cleaned and abs(e.lam - cleaned[-1].lam) <= min_sep and \
                e.disc_value == cleaned[-1].disc_value:
            continue
        cleaned.append(e)
    edges = cleaned

    items = _classify_items(sys, l, params, lo, hi, edges, warnings, dfun)
    _assign_relative_indices(items, warnings)
    shift = _anchor_shift(sys, l, params, grid, disc, items, warnings) if anchor else 0

    return BandStructure(sys=sys, coupling=l, window=(lo, hi),
                         edges=tuple(edges),
                         items=tuple(BandInterval(it.lo, it.hi, it.kind, it.n + shift)
                                     for it in items),
                         anchored=anchor, warnings=tuple(warnings),
                         params=params)


class _MutableInterval:
    __slots__ = ("lo", "hi", "kind", "n", "parity")

    def __init__(self, lo, hi, kind, parity):
        self.lo, self.hi, self.kind, self.parity = lo, hi, kind, parity
        self.n = 0


def _classify_items(sys, l, params, lo, hi, edges, warnings, dfun):
    """Cut the window at the edges and classify every piece, inserting
    zero-width gap items at degenerate edges.

    parity semantics: for a gap, (index mod 2); for a band, the parity of the
    gap at its upper edge, read off the local slope of D (D is strictly
    monotone across a band: increasing runs into a +2 edge, even gap).
    """
    cuts: list[tuple[float, Edge | None]] = [(lo, None)]
    for e in edges:
        cuts.append((e.lam, e))
    cuts.append((hi, None))

    items: list[_MutableInterval] = []
    for idx in range(len(cuts) - 1):
        xa, ea = cuts[idx]
        xb = cuts[idx + 1][0]
        if ea is not None and ea.degenerate:
            par = 0 if ea.disc_value > 0 else 1
            items.append(_MutableInterval(xa, xa, GAP, par))
        if xb - xa <= max(10.0 * params.edge_xtol, 0.0):
            continue
        mid = 0.5 * (xa + xb)
        dmid = dfun(mid)
        if abs(dmid) > 2.0:
            items.append(_MutableInterval(xa, xb, GAP, 0 if dmid > 0 else 1))
        else:
            d25 = dfun(xa + 0.25 * (xb - xa))
            d75 = dfun(xa + 0.75 * (xb - xa))
            slope = d75 - d25
            if slope == 0.0:
                warnings.append(
                    f"unresolved edge: flat discriminant on band ({xa:.6g}, {xb:.6g})")
            par = 0 if slope > 0 else 1
            items.append(_MutableInterval(xa, xb, BAND, par))
    return items


def _assign_relative_indices(items, warnings) -> None:
    if not items:
        return
    first = items[0]
    next_gap_idx = first.parity
    for it in items:
        if it.kind == BAND:
            it.n = next_gap_idx
            if it.parity != (next_gap_idx % 2):
                warnings.append(
                    f"inconsistent slope parity on band ({it.lo:.6g}, {it.hi:.6g})")
        else:
            it.n = next_gap_idx
            if it.parity != (next_gap_idx % 2):
                warnings.append(
                    f"inconsistent sign parity on gap ({it.lo:.6g}, {it.hi:.6g})")
            next_gap_idx += 1


def _relative_k(items, lam, disc):
    """Quasimomentum from relative labels (same arithmetic as BandStructure.k)."""
    for it in items:
        if it.lo - 1e-12 <= lam <= it.hi + 1e-12 and (it.hi > it.lo):
            if it.kind == GAP:
                return it.n * math.pi
            a = math.acos(min(1.0, max(-1.0, 0.5 * disc)))
            return it.n * math.pi - a if it.n % 2 == 0 else (it.n - 1) * math.pi + a
    return items[0].n * math.pi


def _anchor_shift(sys, l, params, grid, disc, items, warnings) -> int:
    """Even shift of all gap indices that matches the rotation number."""
    gaps = [it for it in items if it.kind == GAP and it.hi > it.lo]
    if gaps:
        ref = max(gaps, key=lambda it: it.hi - it.lo)
        lam_ref = 0.5 * (ref.lo + ref.hi)
        k_rel = ref.n * math.pi
    else:
        i = int(np.argmin(np.abs(disc)))
        lam_ref = float(grid[i])
        k_rel = _relative_k(items, lam_ref, float(disc[i]))

    n_per = params.anchor_periods
    for attempt in range(2):
        r = rotation_number(sys, lam_ref, l, n_periods=n_per, params=params)
        shift = 2 * round((r - k_rel) / (2.0 * math.pi))
        if abs(r - (k_rel + shift * math.pi)) < 0.45 * math.pi:
            return int(shift)
        n_per *= 4
    warnings.append(
        f"anchor snap uncertain at lambda={lam_ref:.6g} "
        f"(rotation estimate {r:.6g} vs candidate {k_rel + shift * math.pi:.6g})")
    return int(shift)


def quasimomentum(sys: DiracSystem, lam: float, l: float = None,
                  params: NumericParams | None = None,
                  bands: BandStructure | None = None) -> float:
    """Quasimomentum in the rotation-number normalisation.

    k == n pi on the n-th gap and D == 2 cos k on bands, with k continuous
    and non-decreasing.  A band structure covering lam may be passed in to
    avoid re-analysis."""
    params = params or DEFAULT_PARAMS
    l = _const_coupling(sys, l)
    if math.hypot(sys.mass, l) > sys.potential.sup_norm + abs(lam):
        # lam lies in the central gap: the numerical range of the free part
        # clears the potential and the spectral point, so k = 0 there
        return 0.0
    if bands is None:
        bands = band_edges(sys, l, (lam - 0.75, lam + 0.75), params, anchor=True)
    return bands.k(lam)


def quasimomentum_diff(sys: DiracSystem, lam1: float, lam2: float,
                       l: float = None,
                       params: NumericParams | None = None,
                       bands: BandStructure | None = None) -> float:
    """k(lam2) - k(lam1) from a purely local band analysis of [lam1, lam2].

    Gap parities fix the branch arithmetic absolutely, so no rotation-number
    anchor is needed; the result is nonnegative by construction.
    """
    params = params or DEFAULT_PARAMS
    if lam2 < lam1:
        raise PreconditionError("need lam1 <= lam2")
    if lam2 == lam1:
        return 0.0
    l = _const_coupling(sys, l)
    if math.hypot(sys.mass, l) > sys.potential.sup_norm + max(abs(lam1), abs(lam2)):
        # the whole window sits inside the coupled system's central gap:
        # coupling plus mass outweigh the potential and the window, so no
        # spectrum reaches it and k is constant across it (also keeps very
        # strong couplings away from the hyperbolic overflow regime)
        return 0.0
    if bands is None:
        pad = 1e-3 * (lam2 - lam1)
        bands = band_edges(sys, l, (lam1 - pad, lam2 + pad), params, anchor=False)
    return bands.k(lam2) - bands.k(lam1)


@dataclass(frozen=True)
class FloquetData:
    """Monodromy spectrum at one (lam, l) point with a propagated check.

    mu1 carries the eigenvalue with positive imaginary part in stability
    (|D| < 2, where |mu| = 1) and the larger modulus in instability; the
    product mu1 * mu2 is 1 in either case.  ``residual`` is the worst
    relative deviation of the propagated eigenvector from mu**j scaling over
    five periods.
    """

    monodromy: TransferMatrix
    mu1: complex
    mu2: complex
    discriminant: float
    quasimomentum: float | None
    initial_vector: np.ndarray
    residual: float


def floquet_solution(sys: DiracSystem, lam: float, l: float = None,
                     params: NumericParams | None = None,
                     edge_tol: float = 1e-8,
                     compute_k: bool = True) -> FloquetData:
    """Floquet multipliers and an eigen-initial-vector, verified by direct
    propagation over five periods.  Refuses |D| within edge_tol of 2, where
    the monodromy may be defective."""
    params = params or DEFAULT_PARAMS
    l = _const_coupling(sys, l)
    M = transfer_matrix(sys, lam, 0.0, sys.period, l=l, params=params)
    D = M.trace
    if abs(abs(D) - 2.0) < edge_tol:
        raise PreconditionError(
            f"|D| = {abs(D):.12g} within {edge_tol} of 2: multipliers may be defective")
    half = 0.5 * D
    if abs(D) < 2.0:
        s = math.sqrt(1.0 - half * half)
        mu1 = complex(half, s)
        mu2 = complex(half, -s)
    else:
        s = math.sqrt(half * half - 1.0)
        mu1 = complex(half + math.copysign(s, D))
        mu2 = complex(1.0) / mu1
    a, b, c, d = M.a, M.b, M.c, M.d
    v1 = np.array([b, mu1 - a], dtype=complex)
    v2 = np.array([mu1 - d, c], dtype=complex)
    v = v1 if np.abs(v1).sum() >= np.abs(v2).sum() else v2
    v = v / np.linalg.norm(v)
    xs = sys.period * np.arange(6.0)
    us = solution_samples(sys, lam, xs, v, l=l, params=params)
    resid = 0.0
    for j in range(1, 6):
        ref = mu1 ** j * v
        resid = max(resid, float(np.linalg.norm(us[j] - ref) / np.linalg.norm(ref)))
    k = quasimomentum(sys, lam, l, params) if (compute_k and abs(D) <= 2.0) else None
    return FloquetData(monodromy=M, mu1=mu1, mu2=mu2, discriminant=D,
                       quasimomentum=k, initial_vector=v, residual=resid)
