import math

import numpy as np
import pytest

from diracgap.errors import PreconditionError
from diracgap.potentials import (
    DiracSystem,
    PeriodicPotential,
    PerturbationTemplate,
    eval_potential,
    validate_template,
)


class TestPeriodicPotential:
    def test_piecewise_segment_lookup(self):
        p = PeriodicPotential.piecewise([(0.5, 0.0), (0.5, 4.0)])
        assert eval_potential(p, 0.25) == 0.0
        assert eval_potential(p, 0.75) == 4.0
        # periodicity: 1.75 mod 1 = 0.75
        assert eval_potential(p, 1.75) == 4.0

    def test_piecewise_period_is_sum_of_lengths(self):
        p = PeriodicPotential.piecewise([(0.3, 1.0), (0.5, -2.0), (0.2, 0.5)])
        assert p.period == pytest.approx(1.0, abs=0)
        assert p.sup_norm == 2.0
        assert p.breakpoints() == pytest.approx((0.3, 0.8))

    def test_cosine_at_zero(self):
        p = PeriodicPotential.cosine([(1, 2.0)], period=2.0 * math.pi)
        assert eval_potential(p, 0.0) == pytest.approx(2.0, abs=1e-15)
        assert p.sup_norm == 2.0

    def test_piecewise_periodicity_exact(self):
        rng = np.random.default_rng(7)
        p = PeriodicPotential.piecewise([(0.25, 1.0), (0.5, -3.0), (0.25, 2.0)])
        for _ in range(200):
            x = float(rng.uniform(0.0, 1.0))
            j = int(rng.integers(-50, 50))
            assert eval_potential(p, x + j * p.period) == eval_potential(p, x)

    def test_cosine_periodicity_exact_on_dyadic_grid(self):
        # dyadic x and integer period keep x + j*period exact in floats,
        # so the reduced argument and hence the value match bit for bit
        rng = np.random.default_rng(11)
        p = PeriodicPotential.cosine([(1, 1.0), (3, 0.25)], period=2.0)
        for _ in range(200):
            x = float(rng.integers(0, 2 ** 40)) / 2 ** 40 * 2.0
            j = int(rng.integers(0, 512))
            assert eval_potential(p, x + j * 2.0) == eval_potential(p, x)

    def test_samples_interopolation_and_wrap(self):
        p = PeriodicPotential.from_samples([0.0, 1.0, 0.0, -1.0], period=1.0)
        assert eval_potential(p, 0.125) == pytest.approx(0.5)
        # wrap: last interval interpolates back towards q(0)
        assert eval_potential(p, 0.875) == pytest.approx(-0.5)
        assert abs(eval_potential(p, 5.3) - eval_potential(p, 0.3)) < 1e-12

    def test_sup_norm_bounds_samples(self):
        rng = np.random.default_rng(3)
        vals = rng.uniform(-5.0, 5.0, size=16)
        p = PeriodicPotential.from_samples(vals, period=2.0)
        xs = rng.uniform(0.0, 2.0, size=500)
        assert np.all(np.abs(p.evaluate(xs)) <= p.sup_norm + 1e-12)

    def test_scalar_matches_array_path(self):
        rng = np.random.default_rng(5)
        pots = [
            PeriodicPotential.piecewise([(0.5, 0.0), (0.5, 4.0)]),
            PeriodicPotential.cosine([(1, 1.5), (2, -0.5)], period=1.0),
            PeriodicPotential.from_samples([0.0, 2.0, -1.0], period=1.0),
        ]
        xs = rng.uniform(-3.0, 7.0, size=64)
        for p in pots:
            arr = p.evaluate(xs)
            sca = np.array([p.evaluate_scalar(float(x)) for x in xs])
            assert np.allclose(arr, sca, atol=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            PeriodicPotential.piecewise([(0.0, 1.0)])
        with pytest.raises(ValueError):
            PeriodicPotential.from_samples([1.0], period=1.0)
        with pytest.raises(ValueError):
            DiracSystem(mass=0.0, potential=PeriodicPotential.free())


class TestValidateTemplate:
    def test_inverse_power_beta_one(self):
        rep = validate_template(PerturbationTemplate.inverse_power(1.0), 1e-3, 1.0)
        assert rep.passes
        assert rep.C_estimate == pytest.approx(1.0, abs=1e-12)

    def test_inverse_power_beta_half_fails(self):
        rep = validate_template(PerturbationTemplate.inverse_power(0.5), 1e-3, 1.0)
        assert not rep.passes
        # ratio 0.5 * rho**(-1/2) diverges as the range shrinks
        assert rep.refinement[2] > rep.refinement[0]

    def test_inverse_power_beta_two(self):
        rho_hat = 0.7
        rep = validate_template(PerturbationTemplate.inverse_power(2.0), 1e-4, rho_hat)
        assert rep.passes
        # ratio 2*rho attains its sup at the right end of the range
        assert rep.C_estimate == pytest.approx(2.0 * rho_hat, rel=1e-9)

    @pytest.mark.parametrize("beta", [0.25, 0.5, 0.9, 1.0, 1.3, 2.0, 3.0])
    def test_pass_iff_beta_at_least_one(self, beta):
        rep = validate_template(PerturbationTemplate.inverse_power(beta), 1e-3, 1.0)
        assert rep.passes == (beta >= 1.0)

    def test_table_template(self):
        rho = np.geomspace(1e-4, 10.0, 400)
        tab = PerturbationTemplate.from_table(rho, 1.0 / (1.0 + rho))
        rep = validate_template(tab, 1e-3, 5.0)
        assert rep.passes
        assert rep.C_estimate < 1.5

    def test_rejects_vanishing_template(self):
        tab = PerturbationTemplate.from_table([0.1, 1.0, 2.0], [1.0, 0.0, -1.0])
        with pytest.raises(ValueError):
            validate_template(tab, 0.2, 2.0)

    def test_rejects_bad_range(self):
        with pytest.raises(PreconditionError):
            validate_template(PerturbationTemplate.inverse_power(1.0), 1.0, 0.5)
