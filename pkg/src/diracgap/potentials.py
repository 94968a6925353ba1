"""Periodic background potentials, decaying coupling templates, and the
assembled one-dimensional Dirac system.

The system under study acts on two-component functions as

    -i s2 u' + m s3 u + q(x) u + l(x) s1 u = lam u,

with s1, s2, s3 the Pauli matrices, m > 0 a constant mass, q the periodic
scalar potential and l either a constant coupling or a decaying radial
profile l0(r/c).  Everything in this module is immutable after construction
and evaluation is pure, so instances can be shared freely between workers.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import PreconditionError

TWO_PI = 2.0 * math.pi

PIECEWISE = "piecewise"
COSINE = "cosine"
SAMPLES = "samples"

INVERSE_POWER = "inverse_power"
TABLE = "table"


@dataclass(frozen=True)
class PeriodicPotential:
    """Periodic scalar coefficient q with an evaluable representation.

    ``kind`` is one of ``piecewise`` (constant segments), ``cosine`` (finite
    cosine series) or ``samples`` (uniform samples with linear interpolation
    and periodic wrap).  Evaluation reduces the argument modulo the period
    first.  ``sup_norm`` is a cached upper bound for |q|.
    """

    period: float
    kind: str
    segments: tuple[tuple[float, float], ...] = ()
    cosine_terms: tuple[tuple[int, float], ...] = ()
    samples: tuple[float, ...] = ()
    sup_norm: float = 0.0

    def __post_init__(self):
        if not (self.period > 0.0 and math.isfinite(self.period)):
            raise ValueError("period must be positive and finite")
        if self.kind not in (PIECEWISE, COSINE, SAMPLES):
            raise ValueError(f"unknown potential kind {self.kind!r}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def piecewise(cls, segments: Sequence[tuple[float, float]],
                  sup_norm: float | None = None) -> "PeriodicPotential":
        """Constant segments [(length, value), ...]; the period is the sum of
        the lengths, so the segment partition is exact by construction."""
        segs = tuple((float(L), float(v)) for L, v in segments)
        if not segs or any(L <= 0 for L, _ in segs):
            raise ValueError("piecewise potential needs positive segment lengths")
        period = math.fsum(L for L, _ in segs)
        bound = max(abs(v) for _, v in segs)
        return cls(period=period, kind=PIECEWISE, segments=segs,
                   sup_norm=float(bound if sup_norm is None else sup_norm))

    @classmethod
    def cosine(cls, terms: Sequence[tuple[int, float]], period: float,
               sup_norm: float | None = None) -> "PeriodicPotential":
        """Finite series q(x) = sum_j a_j cos(2 pi f_j x / period) with integer
        frequency indices f_j."""
        ts = tuple((int(f), float(a)) for f, a in terms)
        if any(f < 0 for f, _ in ts):
            raise ValueError("frequency indices must be nonnegative")
        bound = math.fsum(abs(a) for _, a in ts)
        return cls(period=float(period), kind=COSINE, cosine_terms=ts,
                   sup_norm=float(bound if sup_norm is None else sup_norm))

    @classmethod
    def from_samples(cls, values: Sequence[float], period: float,
                     sup_norm: float | None = None) -> "PeriodicPotential":
        """Uniform samples over one period, linearly interpolated with
        periodic wrap q(period) = q(0)."""
        vals = tuple(float(v) for v in values)
        if len(vals) < 2:
            raise ValueError("need at least two samples")
        bound = max(abs(v) for v in vals)
        return cls(period=float(period), kind=SAMPLES, samples=vals,
                   sup_norm=float(bound if sup_norm is None else sup_norm))

    @classmethod
    def free(cls, period: float = 1.0) -> "PeriodicPotential":
        """q identically zero (one constant segment)."""
        return cls.piecewise([(period, 0.0)])

    # -- evaluation --------------------------------------------------------

    @property
    def _boundaries(self) -> tuple[float, ...]:
        # cumulative segment starts [0, L1, L1+L2, ...]; cached lazily
        cached = self.__dict__.get("_bnd")
        if cached is None:
            acc, out = 0.0, [0.0]
            for L, _ in self.segments[:-1]:
                acc += L
                out.append(acc)
            cached = tuple(out)
            self.__dict__["_bnd"] = cached
        return cached

    def breakpoints(self) -> tuple[float, ...]:
        """Interior discontinuity positions within one period (piecewise only)."""
        if self.kind != PIECEWISE:
            return ()
        return self._boundaries[1:]

    def evaluate(self, x):
        """q(x), elementwise for arrays; q(x + period) == q(x) by reduction."""
        arr = np.asarray(x, dtype=float)
        r = np.mod(arr, self.period)
        if self.kind == PIECEWISE:
            bnd = np.asarray(self._boundaries)
            vals = np.asarray([v for _, v in self.segments])
            idx = np.clip(np.searchsorted(bnd, r, side="right") - 1, 0, len(vals) - 1)
            out = vals[idx]
        elif self.kind == COSINE:
            out = np.zeros_like(r)
            for f, a in self.cosine_terms:
                out += a * np.cos(TWO_PI * f * r / self.period)
        else:
            n = len(self.samples)
            vals = np.asarray(self.samples)
            t = r / self.period * n
            i0 = np.clip(t.astype(int), 0, n - 1)
            frac = t - i0
            out = vals[i0] * (1.0 - frac) + vals[(i0 + 1) % n] * frac
        return float(out) if arr.ndim == 0 else out

    def evaluate_scalar(self, x: float) -> float:
        """Fast scalar path used inside integration loops."""
        r = math.fmod(x, self.period)
        if r < 0.0:
            r += self.period
        if self.kind == PIECEWISE:
            i = bisect.bisect_right(self._boundaries, r) - 1
            return self.segments[min(max(i, 0), len(self.segments) - 1)][1]
        if self.kind == COSINE:
            w = TWO_PI * r / self.period
            return math.fsum(a * math.cos(w * f) for f, a in self.cosine_terms)
        n = len(self.samples)
        t = r / self.period * n
        i0 = min(int(t), n - 1)
        frac = t - i0
        return self.samples[i0] * (1.0 - frac) + self.samples[(i0 + 1) % n] * frac

    @property
    def is_piecewise(self) -> bool:
        return self.kind == PIECEWISE


def eval_potential(p: PeriodicPotential, x):
    """Functional alias for :meth:`PeriodicPotential.evaluate`."""
    return p.evaluate(x)


@dataclass(frozen=True)
class PerturbationTemplate:
    """Decaying coupling profile l0 on (0, inf).

    Either an inverse power l0(rho) = rho**(-beta) with beta > 0, or a
    tabulated bounded continuous profile (monotone linear interpolation,
    clamped beyond the table, symmetric-difference derivative).
    """

    kind: str
    beta: float = 0.0
    table_rho: tuple[float, ...] = ()
    table_values: tuple[float, ...] = ()

    @classmethod
    def inverse_power(cls, beta: float) -> "PerturbationTemplate":
        if not beta > 0:
            raise ValueError("beta must be positive")
        return cls(kind=INVERSE_POWER, beta=float(beta))

    @classmethod
    def from_table(cls, rho: Sequence[float], values: Sequence[float]) -> "PerturbationTemplate":
        r = tuple(float(t) for t in rho)
        v = tuple(float(t) for t in values)
        if len(r) != len(v) or len(r) < 2:
            raise ValueError("table needs matching rho/value sequences of length >= 2")
        if any(b <= a for a, b in zip(r, r[1:])) or r[0] <= 0:
            raise ValueError("table abscissae must be positive and strictly increasing")
        return cls(kind=TABLE, table_rho=r, table_values=v)

    @property
    def singular_at_zero(self) -> bool:
        """True when l0(rho) -> inf as rho -> 0 (inverse-power kind)."""
        return self.kind == INVERSE_POWER

    def l0(self, rho):
        arr = np.asarray(rho, dtype=float)
        if self.kind == INVERSE_POWER:
            if np.any(arr <= 0.0):
                raise ValueError("inverse-power template is defined for rho > 0 only")
            out = arr ** (-self.beta)
        else:
            out = np.interp(arr, self.table_rho, self.table_values)
        return float(out) if arr.ndim == 0 else out

    def l0_scalar(self, rho: float) -> float:
        if self.kind == INVERSE_POWER:
            return rho ** (-self.beta)
        return float(np.interp(rho, self.table_rho, self.table_values))

    def l0_prime(self, rho):
        arr = np.asarray(rho, dtype=float)
        if self.kind == INVERSE_POWER:
            out = -self.beta * arr ** (-self.beta - 1.0)
        else:
            h = 0.5 * min(b - a for a, b in zip(self.table_rho, self.table_rho[1:]))
            out = (np.interp(arr + h, self.table_rho, self.table_values)
                   - np.interp(arr - h, self.table_rho, self.table_values)) / (2.0 * h)
        return float(out) if arr.ndim == 0 else out


@dataclass(frozen=True)
class HCheckReport:
    """Result of the decay-regularity check on a template.

    ``C_estimate`` is the grid supremum of |l0'| / l0**2 over the requested
    range; ``passes`` records whether that supremum stays put when the lower
    end of the range is halved twice (a diverging ratio fails).
    """

    passes: bool
    C_estimate: float
    refinement: tuple[float, float, float]


def _ratio_sup(template: PerturbationTemplate, grid: np.ndarray) -> float:
    l0 = template.l0(grid)
    if (not np.all(np.isfinite(l0)) or np.any(l0 == 0.0)
            or np.any(l0[:-1] * l0[1:] < 0.0)):
        raise ValueError("template vanishes or diverges inside the check range")
    return float(np.max(np.abs(template.l0_prime(grid)) / l0 ** 2))


def validate_template(template: PerturbationTemplate, rho_min: float,
                      rho_hat: float, grid_n: int = 512) -> HCheckReport:
    """Estimate sup |l0'|/l0**2 near 0 and flag divergence as rho_min shrinks.

    The refinement extends the grid downward while keeping the base points,
    so the sups are monotone in the range; ``passes`` is True when they do
    not grow (beyond rounding) as rho_min is halved twice.  Inverse powers
    rho**(-beta) pass exactly when beta >= 1.
    """
    if not (0.0 < rho_min < rho_hat):
        raise PreconditionError("need 0 < rho_min < rho_hat")
    c0 = _ratio_sup(template, np.geomspace(rho_min, rho_hat, grid_n))
    n_ext = max(32, grid_n // 8)
    ext1 = np.geomspace(rho_min / 2.0, rho_min, n_ext, endpoint=False)
    c1 = max(c0, _ratio_sup(template, ext1))
    ext2 = np.geomspace(rho_min / 4.0, rho_min / 2.0, n_ext, endpoint=False)
    c2 = max(c1, _ratio_sup(template, ext2))
    tol = 1e-9
    passes = c2 <= c0 * (1.0 + tol) + tol
    return HCheckReport(passes=passes, C_estimate=c0, refinement=(c0, c1, c2))


@dataclass(frozen=True)
class CouplingProfile:
    """Spatially varying coupling r -> l0(r / scale)."""

    template: PerturbationTemplate
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("profile scale must be positive")

    def value(self, r):
        return self.template.l0(np.asarray(r, dtype=float) / self.scale)

    def value_scalar(self, r: float) -> float:
        return self.template.l0_scalar(r / self.scale)


@dataclass(frozen=True)
class DiracSystem:
    """Mass, periodic potential and (optionally) a coupling.

    ``coupling`` is a constant (float) or a :class:`CouplingProfile`; most
    band routines take an explicit coupling argument that overrides it.
    """

    mass: float
    potential: PeriodicPotential
    coupling: float | CouplingProfile = 0.0

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError("mass must be positive")

    @property
    def period(self) -> float:
        return self.potential.period

    def with_coupling(self, coupling) -> "DiracSystem":
        return DiracSystem(self.mass, self.potential, coupling)
