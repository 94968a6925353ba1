"""Shared reference systems used throughout the suite.

The free system (q == 0, m = 1, period 1) has the closed forms

    D(lam) = 2 cos(sqrt(lam^2 - m^2 - l^2))   for lam^2 > m^2 + l^2,
             2 cosh(sqrt(m^2 + l^2 - lam^2))  otherwise,
    k(lam) = sign-consistent sqrt(lam^2 - m^2) above the central gap,

which serve as independent oracles.  The two-step system (q = 0 on the first
half-period, 4 on the second) is the standard nontrivial reference; its
one-period matrix is a product of two closed-form factors.
"""

import numpy as np
import pytest

from diracgap.potentials import DiracSystem, PeriodicPotential


@pytest.fixture(scope="session")
def free_sys():
    return DiracSystem(mass=1.0, potential=PeriodicPotential.free(1.0))


@pytest.fixture(scope="session")
def twostep_sys():
    pot = PeriodicPotential.piecewise([(0.5, 0.0), (0.5, 4.0)])
    return DiracSystem(mass=1.0, potential=pot)


@pytest.fixture(scope="session")
def cosine_sys():
    pot = PeriodicPotential.cosine([(1, 1.5)], period=1.0)
    return DiracSystem(mass=1.0, potential=pot)


def free_discriminant(lam, m=1.0, l=0.0, alpha=1.0):
    """Closed-form discriminant of the free system with constant coupling."""
    gap2 = m * m + l * l
    lam = np.asarray(lam, dtype=float)
    out = np.empty_like(lam)
    inside = lam * lam < gap2
    out[inside] = 2.0 * np.cosh(alpha * np.sqrt(gap2 - lam[inside] ** 2))
    out[~inside] = 2.0 * np.cos(alpha * np.sqrt(lam[~inside] ** 2 - gap2))
    return out if out.ndim else float(out)


def free_quasimomentum(lam, m=1.0, l=0.0, alpha=1.0):
    """Closed-form quasimomentum of the free system, zero on the central gap
    and odd-symmetric outside it."""
    gap2 = m * m + l * l
    lam = np.asarray(lam, dtype=float)
    out = np.where(lam * lam <= gap2, 0.0,
                   np.sign(lam) * alpha * np.sqrt(np.maximum(lam * lam - gap2, 0.0)))
    return out if out.ndim else float(out)
