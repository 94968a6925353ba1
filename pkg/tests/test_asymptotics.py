import math

import numpy as np
import pytest

from diracgap.errors import PreconditionError
from diracgap.potentials import PerturbationTemplate
from diracgap.counting import plan_truncation
from diracgap.asymptotics import (
    convergence_experiment,
    density_integrand,
    predicted_density,
    support_bounds,
)

TPL = PerturbationTemplate.inverse_power(1.0)
# window inside the first noncentral gap of the two-step system
# ([-1.61722, -0.90950]); the coupled bands sweep across it, so the
# predicted density is positive
WIN = (-1.44, -1.09)


class TestDensityIntegrand:
    def test_free_background_vanishes(self, free_sys):
        for rho in (0.05, 0.3, 1.0, 7.0):
            assert density_integrand(free_sys, TPL, -0.5, 0.5, rho) == 0.0

    def test_empty_window(self, twostep_sys):
        assert density_integrand(twostep_sys, TPL, 2.0, 2.0, 0.3) == 0.0

    def test_positive_where_band_crosses(self, twostep_sys):
        # at rho = 0.35 the coupling 1/0.35 ~ 2.86 pushes a band across the
        # window: the coupled discriminant dips inside [-2, 2] there
        from diracgap.floquet import discriminant
        rho = 0.35
        l = TPL.l0_scalar(rho)
        inside = [abs(discriminant(twostep_sys, lam, l)) < 2.0
                  for lam in np.linspace(WIN[0], WIN[1], 21)]
        assert any(inside)
        assert density_integrand(twostep_sys, TPL, WIN[0], WIN[1], rho) > 0.01

    def test_central_gap_window_vanishes_for_all_couplings(self, twostep_sys):
        # the central gap only widens under the coupling: no rho activates it
        for rho in np.geomspace(0.05, 20.0, 25):
            assert density_integrand(twostep_sys, TPL, 1.8, 2.2, float(rho)) == 0.0

    def test_nonnegative_randomized(self, twostep_sys):
        rng = np.random.default_rng(12)
        for _ in range(20):
            rho = float(rng.uniform(0.05, 5.0))
            v = density_integrand(twostep_sys, TPL, WIN[0], WIN[1], rho)
            assert v >= 0.0


class TestSupportBounds:
    def test_free_background_empty(self, free_sys):
        sup = support_bounds(free_sys, TPL, -0.5, 0.5)
        assert sup.empty

    def test_small_bounded_template_empty(self, twostep_sys):
        rho = np.geomspace(1e-3, 50.0, 200)
        small = PerturbationTemplate.from_table(rho, 0.05 / (1.0 + rho))
        sup = support_bounds(twostep_sys, small, WIN[0], WIN[1])
        assert sup.empty

    def test_twostep_finite_bracket(self, twostep_sys):
        sup = support_bounds(twostep_sys, TPL, WIN[0], WIN[1])
        assert not sup.empty
        assert 0.0 < sup.lo < sup.hi < math.inf
        assert sup.lo == pytest.approx(0.2568, abs=2e-3)
        assert sup.hi == pytest.approx(0.4623, abs=2e-3)
        assert not sup.warnings

    def test_vanishes_outside_bracket(self, twostep_sys):
        sup = support_bounds(twostep_sys, TPL, WIN[0], WIN[1])
        for rho in (0.9 * sup.lo, 1.1 * sup.hi, 3.0 * sup.hi):
            assert density_integrand(twostep_sys, TPL, WIN[0], WIN[1], rho) == 0.0

    def test_boundary_warning(self, twostep_sys):
        sup = support_bounds(twostep_sys, TPL, WIN[0], WIN[1], search=(0.3, 0.4))
        assert any("boundary" in w for w in sup.warnings)


class TestPredictedDensity:
    def test_free_background_zero(self, free_sys):
        pred = predicted_density(free_sys, TPL, -0.5, 0.5)
        assert pred.value == 0.0 and pred.support is None

    def test_twostep_positive_value(self, twostep_sys):
        pred = predicted_density(twostep_sys, TPL, WIN[0], WIN[1])
        assert pred.value > 0.03
        assert pred.error_estimate < 1e-6 * max(pred.value, 1.0)

    def test_invariant_under_node_doubling(self, twostep_sys):
        sup = support_bounds(twostep_sys, TPL, WIN[0], WIN[1])
        p1 = predicted_density(twostep_sys, TPL, WIN[0], WIN[1], support=sup)
        p2 = predicted_density(twostep_sys, TPL, WIN[0], WIN[1], support=sup,
                               panels=128)
        assert abs(p1.value - p2.value) <= 2.0 * (p1.error_estimate
                                                  + p2.error_estimate) + 1e-12

    def test_change_of_variables_identity(self, twostep_sys):
        # for the inverse-first-power profile, integrating over the scaled
        # radius equals integrating over the coupling with weight 1/l**2;
        # an independent uniform midpoint rule in coupling space must agree
        from diracgap.floquet import quasimomentum_diff
        sup = support_bounds(twostep_sys, TPL, WIN[0], WIN[1])
        pred = predicted_density(twostep_sys, TPL, WIN[0], WIN[1], support=sup)
        l_lo, l_hi = 1.0 / sup.hi, 1.0 / sup.lo
        n = 2000
        ls = l_lo + (np.arange(n) + 0.5) * (l_hi - l_lo) / n
        vals = np.array([quasimomentum_diff(twostep_sys, WIN[0], WIN[1], float(l))
                         / (l * l) for l in ls])
        other = vals.sum() * (l_hi - l_lo) / n / (twostep_sys.period * math.pi)
        assert abs(other - pred.value) <= 1e-6


class TestConvergenceExperiment:
    def test_free_background_null_case(self, free_sys):
        rep = convergence_experiment(free_sys, TPL, -0.5, 0.5, [25.0, 50.0],
                                     gap_margin=0.25)
        assert rep.prediction.value == 0.0
        for row in rep.rows:
            assert row.n_over_c <= 10.0 / row.c
            assert row.ratio(rep.prediction.value) is None
        assert rep.verdict is not None
        assert rep.verdict["final_ratio"] is None

    def test_single_scale_no_verdict(self, free_sys):
        rep = convergence_experiment(free_sys, TPL, -0.5, 0.5, [25.0],
                                     gap_margin=0.25)
        assert rep.verdict is None
        assert len(rep.rows) == 1

    def test_twostep_rows_and_budget(self, twostep_sys):
        rep = convergence_experiment(twostep_sys, TPL, WIN[0], WIN[1],
                                     [25.0, 50.0], gap_margin=0.15)
        assert [r.c for r in rep.rows] == [25.0, 50.0]
        assert rep.rows[0].count.n >= 1
        assert all(r.count.error_budget == 6 for r in rep.rows)
        assert rep.verdict is not None and not rep.failures

    def test_workers_match_serial(self, twostep_sys):
        kw = dict(gap_margin=0.15)
        r1 = convergence_experiment(twostep_sys, TPL, WIN[0], WIN[1],
                                    [25.0, 50.0], **kw)
        r2 = convergence_experiment(twostep_sys, TPL, WIN[0], WIN[1],
                                    [25.0, 50.0], workers=2, **kw)
        assert [r.count.n for r in r1.rows] == [r.count.n for r in r2.rows]
        assert [r.count.theta2 for r in r1.rows] == [r.count.theta2 for r in r2.rows]

    def test_scale_below_c0_rejected(self, free_sys):
        with pytest.raises(PreconditionError):
            convergence_experiment(free_sys, TPL, -0.5, 0.5, [1.0, 25.0],
                                   gap_margin=0.25)
        with pytest.raises(PreconditionError):
            convergence_experiment(free_sys, TPL, -0.5, 0.5, [50.0, 25.0],
                                   gap_margin=0.25)


class TestInnerVanishing:
    def test_integrand_zero_below_inner_cut(self, twostep_sys):
        plan = plan_truncation(twostep_sys, TPL, WIN[0], WIN[1], gap_margin=0.15)
        for rho in np.geomspace(2e-3, plan.rho0, 16):
            assert density_integrand(twostep_sys, TPL, WIN[0], WIN[1],
                                     float(rho)) == 0.0
