"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with -s to see them inline).
Reference values marked as frozen were computed by independent oracles
before the implementation was finalised:

* the closed-form free-system quasimomentum k = sqrt(lam**2 - m**2);
* the counting limit (sqrt(5.25) - sqrt(1.25)) / pi = 0.37345 (4 d.p.);
* the positive-case density 0.05729082 from a uniform midpoint rule at ten
  times the adaptive quadrature's node count.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from diracgap.potentials import (
    DiracSystem,
    PeriodicPotential,
    PerturbationTemplate,
    validate_template,
)
from diracgap.integrate import prufer_path, transfer_matrix
from diracgap.floquet import band_edges, discriminant_grid, rotation_numbers
from diracgap.counting import (
    BoundaryCondition,
    count_length_sweep,
    count_halfline,
    plan_truncation,
    split_count_check,
)
from diracgap.asymptotics import predicted_density, support_bounds
from diracgap.cli import main as cli_main

FREE = DiracSystem(1.0, PeriodicPotential.free(1.0))
TWOSTEP = DiracSystem(1.0, PeriodicPotential.piecewise([(0.5, 0.0), (0.5, 4.0)]))
TPL = PerturbationTemplate.inverse_power(1.0)
BC0 = BoundaryCondition.u2_zero()

# positive-case configuration: a window inside the first noncentral gap
# [-1.61722, -0.90950] of the two-step system (the central gap only widens
# under the coupling and stays empty)
POS_WINDOW = (-1.44, -1.09)
POS_MARGIN = 0.15
C_LIST = (25.0, 50.0, 100.0, 200.0)

# frozen before the build: uniform midpoint rule over the support bracket
# (0.25683, 0.46229) with 5730 nodes, ten times the adaptive node count
RIEMANN_REFERENCE = 0.05729082

# two-band grids: the free pair of bands is separated by the closed gap at
# sqrt(1 + pi**2) ~ 3.2969; the two-step grid spans the bands on both sides
# of the gap [1.157, 2.843]
GRID_FREE = np.linspace(1.05, 6.0, 200)
GRID_TWOSTEP = np.linspace(-0.5, 3.5, 200)


def report(num: int, description: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    extra = f"  [{detail}]" if detail else ""
    print(f"{status}  criterion {num}: {description}{extra}")
    assert ok, f"criterion {num} failed: {description} {extra}"


def bands_for(sys, grid):
    lo, hi = float(grid.min()), float(grid.max())
    return band_edges(sys, 0.0, (lo - 1e-3, hi + 1e-3))


def test_criterion_1_integrator_correctness():
    rng = np.random.default_rng(20260809)
    t0 = time.monotonic()
    worst_det = 0.0
    worst_dev = 0.0
    for _ in range(200):
        nseg = int(rng.integers(2, 6))
        segs = [(float(rng.uniform(0.1, 0.6)), float(rng.uniform(-5.0, 5.0)))
                for _ in range(nseg)]
        sys = DiracSystem(float(rng.uniform(0.2, 3.0)),
                          PeriodicPotential.piecewise(segs))
        lam = float(rng.uniform(-5.0, 5.0))
        l = float(rng.uniform(-2.0, 2.0))
        mono = transfer_matrix(sys, lam, 0.0, sys.period, l=l)
        worst_det = max(worst_det, abs(mono.det - 1.0))
        general = transfer_matrix(sys, lam, 0.0, sys.period, l=l, method="gauss")
        exact = transfer_matrix(sys, lam, 0.0, sys.period, l=l, method="exact")
        dev = np.abs(general.as_array() - exact.as_array()).max()
        worst_dev = max(worst_dev, float(dev))
    elapsed = time.monotonic() - t0
    ok = worst_det <= 1e-10 and worst_dev <= 1e-9 and elapsed < 10.0
    report(1, "monodromy det within 1e-10 and general integrator within "
              "1e-9 of the exact segment product on 200 random systems", ok,
           f"det err {worst_det:.2e}, dev {worst_dev:.2e}, {elapsed:.1f}s")


def test_criterion_2_discriminant_cosine_identity():
    worst = 0.0
    for sys, grid in ((FREE, GRID_FREE), (TWOSTEP, GRID_TWOSTEP)):
        bs = bands_for(sys, grid)
        disc = discriminant_grid(sys, grid, 0.0)
        ks = bs.k_grid(grid, disc=disc)
        inside = np.abs(disc) <= 2.0
        assert inside.sum() > 100
        worst = max(worst, float(np.abs(disc[inside]
                                        - 2.0 * np.cos(ks[inside])).max()))
    ok = worst <= 1e-8
    report(2, "D = 2 cos k on bands of the free and two-step systems "
              "(200-point grids)", ok, f"max deviation {worst:.2e}")


def test_criterion_3_phase_deviation_bounded():
    cases = [(FREE, 1.5), (FREE, 2.0), (FREE, 2.8), (TWOSTEP, 0.5), (TWOSTEP, 3.5)]
    worst = 0.0
    for sys, lam in cases:
        bs = band_edges(sys, 0.0, (lam - 0.75, lam + 0.75))
        assert bs.interval_at(lam).kind == "band"
        k = bs.k(lam)
        xs, th = prufer_path(sys, lam, 0.0, 0.0, 100.0 * sys.period)
        dev = np.abs(th - k * xs / sys.period)
        first = dev[(xs <= 50.0 * sys.period)].max()
        second = dev[(xs >= 50.0 * sys.period)].max()
        worst = max(worst, second / first)
    ok = worst <= 1.05
    report(3, "phase deviation from linear growth does not grow between "
              "[0, 50a] and [50a, 100a] at 5 band points", ok,
           f"worst window ratio {worst:.4f}")


def test_criterion_4_quasimomentum_cross_validation():
    worst_rot = 0.0
    for sys, grid in ((FREE, GRID_FREE), (TWOSTEP, GRID_TWOSTEP)):
        bs = bands_for(sys, grid)
        ks = bs.k_grid(grid)
        rots = rotation_numbers(sys, grid, 0.0, n_periods=2000)
        worst_rot = max(worst_rot, float(np.abs(ks - rots).max()))
    bs_free = bands_for(FREE, GRID_FREE)
    k_free = bs_free.k_grid(GRID_FREE)
    closed = np.sqrt(np.maximum(GRID_FREE ** 2 - 1.0, 0.0))
    worst_closed = float(np.abs(k_free - closed).max())
    ok = worst_rot <= 5e-3 and worst_closed <= 1e-6
    report(4, "band-analysis k within 5e-3 of the 2000-period rotation "
              "number and within 1e-6 of the free closed form", ok,
           f"rotation dev {worst_rot:.2e}, closed-form dev {worst_closed:.2e}")


def test_criterion_5_counting_limit():
    t0 = time.monotonic()
    rows = count_length_sweep(FREE, 0.0, BC0, 1.5, 2.5, [25.0, 50.0, 100.0, 200.0])
    devs = [(r.length, abs(r.ratio - 0.37345)) for r in rows]
    elapsed = time.monotonic() - t0
    ok = all(d <= 2.0 / L for L, d in devs) and elapsed < 30.0
    report(5, "free-system counts per unit length within 2/L of 0.37345 "
              "for L in {25, 50, 100, 200}", ok,
           "devs " + ", ".join(f"L={L:.0f}:{d:.4f}" for L, d in devs)
           + f", {elapsed:.1f}s")


def test_criterion_6_splitting_inequality():
    rng = np.random.default_rng(42)
    ok = True
    worst = 0
    for sys in (FREE, TWOSTEP):
        for _ in range(50):
            ncuts = int(rng.integers(1, 6))
            cuts = np.sort(rng.uniform(1.0, 49.0, size=ncuts))
            chk = split_count_check(sys, 0.0, 50.0, cuts, 1.5, 2.5)
            ok = ok and chk.ok
            worst = max(worst, chk.lhs - chk.bound)
    report(6, "partition counts differ from the direct count by at most "
              "2(n+1) on 100 random partitions", ok,
           f"worst lhs-bound margin {worst}")


def test_criterion_7_null_case():
    pred = predicted_density(FREE, TPL, -0.5, 0.5)
    plan = plan_truncation(FREE, TPL, -0.5, 0.5, gap_margin=0.25)
    counts = {c: count_halfline(FREE, TPL, c, -0.5, 0.5, plan).n for c in C_LIST}
    ok = pred.value == 0.0 and all(n <= 10 for n in counts.values())
    report(7, "free background: predicted density exactly 0 and N(c) <= 10 "
              "for c in {25, 50, 100, 200}", ok,
           f"predicted {pred.value}, counts {counts}")


@pytest.fixture(scope="module")
def positive_case():
    lam1, lam2 = POS_WINDOW
    sup = support_bounds(TWOSTEP, TPL, lam1, lam2)
    pred = predicted_density(TWOSTEP, TPL, lam1, lam2, support=sup)
    plan = plan_truncation(TWOSTEP, TPL, lam1, lam2, gap_margin=POS_MARGIN)
    return sup, pred, plan


def test_criterion_8_positive_case(positive_case):
    t0 = time.monotonic()
    sup, pred, plan = positive_case
    lam1, lam2 = POS_WINDOW
    assert not sup.empty and pred.value > 0.0
    counts = {c: count_halfline(TWOSTEP, TPL, c, lam1, lam2, plan).n
              for c in C_LIST}
    errs = [abs(counts[c] / c - pred.value) for c in C_LIST]
    monotone = all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))
    ratio = counts[200.0] / (200.0 * pred.value)
    frozen_ok = abs(pred.value - RIEMANN_REFERENCE) <= 5e-6
    elapsed = time.monotonic() - t0
    ok = (0.85 <= ratio <= 1.15) and monotone and frozen_ok and elapsed < 600.0
    report(8, "two-step positive case: N(200)/(200 predicted) in "
              "[0.85, 1.15], |N/c - predicted| monotone over c, prediction "
              "matches the frozen 10x Riemann reference", ok,
           f"ratio {ratio:.4f}, errs {[f'{e:.5f}' for e in errs]}, "
           f"pred {pred.value:.8f} vs {RIEMANN_REFERENCE}, {elapsed:.0f}s")


def test_criterion_9_decay_regularity_gate():
    rep1 = validate_template(PerturbationTemplate.inverse_power(1.0), 1e-4, 1.0)
    rep_half = validate_template(PerturbationTemplate.inverse_power(0.5), 1e-4, 1.0)
    ok = (rep1.passes and abs(rep1.C_estimate - 1.0) <= 1e-9
          and not rep_half.passes)
    report(9, "decay-regularity gate: 1/rho passes with C = 1, "
              "rho**-0.5 is rejected", ok,
           f"C={rep1.C_estimate!r}, half-power passes={rep_half.passes}")


def test_criterion_10_determinism(tmp_path):
    cfg = Path(__file__).resolve().parent.parent / "configs" / "twostep_asymptotics.json"
    outs = []
    for name in ("one", "two"):
        out = tmp_path / f"{name}.csv"
        code = cli_main(["asymptotics", "--config", str(cfg), "--out",
                         str(out), "--no-plot"])
        assert code == 0
        outs.append(out)
    same_csv = outs[0].read_bytes() == outs[1].read_bytes()
    same_json = (outs[0].with_suffix(".json").read_bytes()
                 == outs[1].with_suffix(".json").read_bytes())
    ok = same_csv and same_json
    report(10, "two runs of the positive-case config produce byte-identical "
               "reports", ok, f"csv identical {same_csv}, json identical {same_json}")
