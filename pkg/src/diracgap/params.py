"""Numerical control parameters used by the propagation and band routines.

All step sizes and grid resolutions are derived from these values and from
the inputs alone, never from timing or adaptive state, so every result is
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class NumericParams:
    #: fixed integration steps per potential period for the general schemes
    steps_per_period: int = 64
    #: discriminant scan density for band-edge bracketing (points per unit lambda)
    edge_scan_per_unit: int = 512
    #: bisection width for band-edge roots
    edge_xtol: float = 1e-10
    #: |D| within this of 2 at a refined extremum counts as a closed (degenerate) gap
    degen_tol: float = 1e-9
    #: periods used for the one-off rotation-number snap that fixes gap labels
    anchor_periods: int = 192
    #: maximum angle advance per substep of the exact Pruefer propagation (< pi)
    max_angle_step: float = 1.5
    #: initial panels for the adaptive density quadrature
    quad_panels: int = 64
    #: relative tolerance target for the adaptive density quadrature
    quad_rel_tol: float = 1e-6
    #: couplings sampled when bracketing the density support
    support_scan_points: int = 256

    def with_(self, **kwargs) -> "NumericParams":
        return replace(self, **kwargs)


DEFAULT_PARAMS = NumericParams()
