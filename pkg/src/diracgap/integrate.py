"""Propagation of the two-component system as 2x2 transfer matrices and as a
scalar phase flow.

First-order form: u' = A(x) u with the traceless coefficient matrix

    A(x) = [[ -l(x),            lam + m - q(x) ],
            [ m + q(x) - lam,   l(x)           ]].

Writing a real solution as u = R (cos th, -sin th) gives the angle and
log-amplitude equations

    th'      = lam - q(x) - m cos(2 th) + l(x) sin(2 th),
    (log R)' = -m sin(2 th) - l(x) cos(2 th).

The angle is always advanced continuously (never reduced mod pi): eigenvalue
counting depends on its total winding.

Two propagation paths are provided and cross-checked in the tests:

* an exact path for piecewise-constant q with constant coupling, built from
  the closed-form exponential of a traceless matrix (no truncation error);
* a general path: fixed-step fourth-order Gauss commutator (Magnus) steps
  for the matrix flow (every factor is an exact exponential of a traceless
  matrix, so det == 1 holds structurally, and constant pieces are still
  propagated exactly), and classical fixed-step RK4 for the scalar angle
  flow.

Step sizes are fixed functions of the inputs, so results are deterministic
and all functions are pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .params import DEFAULT_PARAMS, NumericParams
from .potentials import CouplingProfile, DiracSystem, PeriodicPotential

__all__ = [
    "TransferMatrix",
    "PruferState",
    "coefficient_matrix",
    "constant_step",
    "transfer_matrix",
    "one_period_matrices",
    "propagate_prufer",
    "prufer_angles",
    "prufer_path",
    "solution_samples",
]


@dataclass(frozen=True)
class TransferMatrix:
    """Real 2x2 matrix propagating solution values; det == 1 up to rounding."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def identity(cls) -> "TransferMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, arr) -> "TransferMatrix":
        arr = np.asarray(arr, dtype=float)
        return cls(float(arr[0, 0]), float(arr[0, 1]),
                   float(arr[1, 0]), float(arr[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> float:
        return self.a + self.d

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix.from_array(self.as_array() @ other.as_array())

    def apply(self, v) -> np.ndarray:
        return self.as_array() @ np.asarray(v)


@dataclass(frozen=True)
class PruferState:
    """Unwrapped phase angle and log amplitude of a real solution."""

    theta: float
    log_r: float


def coefficient_matrix(lam: float, l: float, q_x: float, m: float) -> np.ndarray:
    """Traceless first-order coefficient matrix at a point."""
    return np.array([[-l, lam + m - q_x], [m + q_x - lam, l]])


def _exp_coeffs(det_a, h: float):
    """(C, S) with exp(h A) = C I + S A for traceless A and det A = det_a.

    det_a > 0 gives the trigonometric branch, det_a < 0 the hyperbolic one,
    and a series is used near zero so both limits are smooth.
    """
    d = np.asarray(det_a, dtype=float)
    w2 = d * (h * h)
    C = np.empty_like(d)
    S = np.empty_like(d)
    small = np.abs(w2) < 1e-12
    pos = (d > 0.0) & ~small
    neg = (d < 0.0) & ~small
    if np.any(pos):
        w = np.sqrt(d[pos])
        C[pos] = np.cos(w * h)
        S[pos] = np.sin(w * h) / w
    if np.any(neg):
        w = np.sqrt(-d[neg])
        C[neg] = np.cosh(w * h)
        S[neg] = np.sinh(w * h) / w
    if np.any(small):
        z = w2[small]
        C[small] = 1.0 - z / 2.0 + z * z / 24.0
        S[small] = h * (1.0 - z / 6.0 + z * z / 120.0)
    return C, S


def _exp2(A: np.ndarray, h: float) -> np.ndarray:
    C, S = _exp_coeffs(float(np.linalg.det(A)), h)
    return float(C) * np.eye(2) + float(S) * A


_GAUSS_C1 = 0.5 - math.sqrt(3.0) / 6.0
_GAUSS_C2 = 0.5 + math.sqrt(3.0) / 6.0
_COMM_W = math.sqrt(3.0) / 12.0


def _gauss_step(lam: float, m: float, q1: float, q2: float, l1: float,
                l2: float, h: float) -> np.ndarray:
    """Fourth-order one-step propagator from the two-point Gauss commutator
    expansion; reduces to the exact exponential when A is constant."""
    A1 = coefficient_matrix(lam, l1, q1, m)
    A2 = coefficient_matrix(lam, l2, q2, m)
    omega = (0.5 * h) * (A1 + A2) + (_COMM_W * h * h) * (A2 @ A1 - A1 @ A2)
    return _exp2(omega, 1.0)


def constant_step(A, h: float) -> TransferMatrix:
    """Exact one-step propagator exp(h A) for a traceless 2x2 matrix."""
    A = np.asarray(A, dtype=float)
    if abs(A[0, 0] + A[1, 1]) > 1e-12 * (1.0 + np.abs(A).max()):
        raise PreconditionError("constant_step requires a traceless matrix")
    return TransferMatrix.from_array(_exp2(A, float(h)))


# ---------------------------------------------------------------------------
# coupling / piece plumbing
# ---------------------------------------------------------------------------


def _resolve_coupling(sys: DiracSystem, l):
    """Normalise a coupling argument to ('const', value) or ('profile', f)."""
    if l is None:
        l = sys.coupling
    if isinstance(l, CouplingProfile):
        return "profile", l.value_scalar
    if callable(l):
        return "profile", l
    return "const", float(l)


def _piece_iter(pot: PeriodicPotential, x0: float, x1: float):
    """Yield (length, q_value) pieces of [x0, x1] aligned to the segment
    boundaries of a piecewise potential; q_value is exact on each piece."""
    alpha = pot.period
    segs = pot.segments
    bnds = pot._boundaries
    remaining = x1 - x0
    if remaining <= 0.0:
        return
    r = math.fmod(x0, alpha)
    if r < 0.0:
        r += alpha
    if r >= alpha:
        r = 0.0
    i = 0
    for j in range(len(bnds) - 1, -1, -1):
        if bnds[j] <= r:
            i = j
            break
    seg_end = bnds[i + 1] if i + 1 < len(segs) else alpha
    d = seg_end - r
    cutoff = 1e-12 * alpha
    while remaining > cutoff:
        h = min(d, remaining)
        if h > cutoff:
            yield h, segs[i][1]
        remaining -= h
        i = (i + 1) % len(segs)
        d = segs[i][0]


def _general_pieces(pot: PeriodicPotential, x0: float, x1: float):
    """Pieces for the general path: q-aligned when piecewise (with the exact
    segment value), otherwise the whole span with q sampled later."""
    if pot.is_piecewise:
        yield from _piece_iter(pot, x0, x1)
    else:
        if x1 > x0:
            yield x1 - x0, None


# ---------------------------------------------------------------------------
# transfer matrices
# ---------------------------------------------------------------------------


def transfer_matrix(sys: DiracSystem, lam: float, x0: float, x1: float,
                    l=None, params: NumericParams | None = None,
                    method: str = "auto") -> TransferMatrix:
    """Propagator of u' = A(x) u from x0 to x1; columns solve the system with
    initial values e1, e2.  x1 == x0 returns the identity."""
    params = params or DEFAULT_PARAMS
    if x1 < x0:
        raise PreconditionError("transfer_matrix requires x0 <= x1")
    if x1 == x0:
        return TransferMatrix.identity()
    kind, lv = _resolve_coupling(sys, l)
    if method == "auto":
        method = "exact" if (sys.potential.is_piecewise and kind == "const") else "gauss"
    if method == "exact":
        if not (sys.potential.is_piecewise and kind == "const"):
            raise PreconditionError("exact stepping needs piecewise q and constant coupling")
        M = np.eye(2)
        m = sys.mass
        for h, qv in _piece_iter(sys.potential, x0, x1):
            M = _exp2(coefficient_matrix(lam, lv, qv, m), h) @ M
        return TransferMatrix.from_array(M)
    if method != "gauss":
        raise ValueError(f"unknown method {method!r}")
    m = sys.mass
    pot = sys.potential
    h_max = pot.period / params.steps_per_period
    M = np.eye(2)
    x = x0
    for plen, qv in _general_pieces(pot, x0, x1):
        n = max(1, math.ceil(plen / h_max))
        hs = plen / n
        for j in range(n):
            xa = x + j * hs
            x1g = xa + _GAUSS_C1 * hs
            x2g = xa + _GAUSS_C2 * hs
            if qv is not None:
                q1 = q2 = qv
            else:
                q1 = pot.evaluate_scalar(x1g)
                q2 = pot.evaluate_scalar(x2g)
            if kind == "const":
                l1 = l2 = lv
            else:
                l1 = lv(x1g)
                l2 = lv(x2g)
            M = _gauss_step(lam, m, q1, q2, l1, l2, hs) @ M
        x += plen
    return TransferMatrix.from_array(M)


def one_period_matrices(sys: DiracSystem, lams, l: float,
                        params: NumericParams | None = None,
                        method: str = "auto") -> np.ndarray:
    """Monodromy matrices over [0, period] for an array of lambda values,
    constant coupling.  Returns shape (n, 2, 2)."""
    params = params or DEFAULT_PARAMS
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    m = sys.mass
    lv = float(l)
    pot = sys.potential
    if method == "auto":
        method = "exact" if pot.is_piecewise else "gauss"
    longest = (max(L for L, _ in pot.segments) if pot.is_piecewise
               else pot.period / params.steps_per_period)
    if math.hypot(m, lv) * longest > 680.0:
        raise PreconditionError(
            "coupling too strong for double-precision band analysis: the "
            "one-period propagator overflows")
    M = np.broadcast_to(np.eye(2), (lams.size, 2, 2)).copy()

    def push(o00, o01, o10):
        # apply exp(Omega) for the stacked traceless Omega = [[o00,o01],[o10,-o00]]
        C, S = _exp_coeffs(-o00 * o00 - o01 * o10, 1.0)
        F = np.empty_like(M)
        F[:, 0, 0] = C + S * o00
        F[:, 0, 1] = S * o01
        F[:, 1, 0] = S * o10
        F[:, 1, 1] = C - S * o00
        return np.einsum("nij,njk->nik", F, M)

    if method == "exact":
        for h, qv in _piece_iter(pot, 0.0, pot.period):
            u = lams - qv
            M = push(np.full_like(u, -h * lv), h * (u + m), h * (m - u))
    else:
        # two-point Gauss commutator step; for constant coupling the
        # commutator of the node matrices has the closed form
        # 2 (q1 - q2) [[m, l], [l, -m]]
        h_max = pot.period / params.steps_per_period
        x = 0.0
        for plen, qv in _general_pieces(pot, 0.0, pot.period):
            n = max(1, math.ceil(plen / h_max))
            hs = plen / n
            for j in range(n):
                xa = x + j * hs
                if qv is not None:
                    q1 = q2 = qv
                else:
                    q1 = pot.evaluate_scalar(xa + _GAUSS_C1 * hs)
                    q2 = pot.evaluate_scalar(xa + _GAUSS_C2 * hs)
                ubar = lams - 0.5 * (q1 + q2)
                kap = 2.0 * _COMM_W * hs * hs * (q1 - q2)
                M = push(np.full_like(ubar, -hs * lv + kap * m),
                         hs * (ubar + m) + kap * lv,
                         hs * (m - ubar) + kap * lv)
            x += plen
    return M


# ---------------------------------------------------------------------------
# phase (Pruefer) propagation
# ---------------------------------------------------------------------------


def _prufer_exact_vec(sys: DiracSystem, lams: np.ndarray, theta0: np.ndarray,
                      x0: float, x1: float, lv: float, params: NumericParams,
                      record: bool = False):
    """Exact-path phase propagation, vectorised over lambda.

    The solution vector is advanced by closed-form exponentials on substeps
    short enough that the true angle advance stays below ``max_angle_step``
    (< pi), so atan2 differences unwrap the angle unambiguously.
    """
    m = sys.mass
    th = theta0.astype(float).copy()
    v = np.stack([np.cos(th), -np.sin(th)], axis=-1)
    phi = np.arctan2(-v[:, 1], v[:, 0])
    log_r = np.zeros_like(th)
    xs = [x0] if record else None
    trace = [th.copy()] if record else None
    hyp = math.hypot(m, lv)
    x = x0
    for plen, qv in _piece_iter(sys.potential, x0, x1):
        rate = float(np.max(np.abs(lams - qv))) + hyp
        nsub = max(1, math.ceil(plen * rate / params.max_angle_step))
        hs = plen / nsub
        u = lams - qv
        det_a = u * u - (m * m + lv * lv)
        C, S = _exp_coeffs(det_a, hs)
        f00 = C - S * lv
        f01 = S * (u + m)
        f10 = S * (m - u)
        f11 = C + S * lv
        for j in range(nsub):
            w0 = f00 * v[:, 0] + f01 * v[:, 1]
            w1 = f10 * v[:, 0] + f11 * v[:, 1]
            phi_new = np.arctan2(-w1, w0)
            dphi = phi_new - phi
            dphi = (dphi + math.pi) % (2.0 * math.pi) - math.pi
            th += dphi
            phi = phi_new
            nrm = np.hypot(w0, w1)
            log_r += np.log(nrm)
            v[:, 0] = w0 / nrm
            v[:, 1] = w1 / nrm
            if record:
                xs.append(x + (j + 1) * hs)
                trace.append(th.copy())
        x += plen
    if record:
        return th, log_r, np.asarray(xs), np.asarray(trace)
    return th, log_r


def _prufer_rk4(sys: DiracSystem, lam: float, theta0: float, x0: float,
                x1: float, coupling, params: NumericParams):
    """Classical fixed-step RK4 on the scalar angle / log-amplitude flow.

    Steps are aligned to the discontinuities of a piecewise potential, so
    the right-hand side is smooth on every step.
    """
    m = sys.mass
    pot = sys.potential
    kind, lv = coupling
    alpha = pot.period
    spp = params.steps_per_period
    th = float(theta0)
    lr = 0.0
    x = x0
    cos = math.cos
    sin = math.sin
    for plen, qv in _general_pieces(pot, x0, x1):
        if kind == "const":
            l_here = abs(lv)
        else:
            l_here = max(abs(lv(x)), abs(lv(x + 0.5 * plen)), abs(lv(x + plen)))
        rate = abs(lam) + pot.sup_norm + math.hypot(m, l_here)
        n = max(math.ceil(plen * spp / alpha), math.ceil(plen * rate / 1.5), 1)
        hs = plen / n
        for j in range(n):
            xa = x + j * hs
            xm = xa + 0.5 * hs
            xb = xa + hs
            if qv is not None:
                qa = qm = qb = qv
            else:
                qa = pot.evaluate_scalar(xa)
                qm = pot.evaluate_scalar(xm)
                qb = pot.evaluate_scalar(xb)
            if kind == "const":
                la = lm = lb = lv
            else:
                la = lv(xa)
                lm = lv(xm)
                lb = lv(xb)
            t2 = 2.0 * th
            k1 = lam - qa - m * cos(t2) + la * sin(t2)
            g1 = -m * sin(t2) - la * cos(t2)
            t2 = 2.0 * (th + 0.5 * hs * k1)
            k2 = lam - qm - m * cos(t2) + lm * sin(t2)
            g2 = -m * sin(t2) - lm * cos(t2)
            t2 = 2.0 * (th + 0.5 * hs * k2)
            k3 = lam - qm - m * cos(t2) + lm * sin(t2)
            g3 = -m * sin(t2) - lm * cos(t2)
            t2 = 2.0 * (th + hs * k3)
            k4 = lam - qb - m * cos(t2) + lb * sin(t2)
            g4 = -m * sin(t2) - lb * cos(t2)
            th += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            lr += hs / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
        x += plen
    return th, lr


def propagate_prufer(sys: DiracSystem, lam: float, theta0: float, x0: float,
                     x1: float, l=None, params: NumericParams | None = None,
                     method: str = "auto") -> PruferState:
    """Advance the phase angle continuously from x0 to x1.

    The angle is never reduced mod pi; the reconstructed vector
    R (cos th, -sin th) solves the system.
    """
    params = params or DEFAULT_PARAMS
    if x1 < x0:
        raise PreconditionError("propagate_prufer requires x0 <= x1")
    if x1 == x0:
        return PruferState(float(theta0), 0.0)
    coup = _resolve_coupling(sys, l)
    if method == "auto":
        method = "exact" if (sys.potential.is_piecewise and coup[0] == "const") else "rk4"
    if method == "exact":
        if not (sys.potential.is_piecewise and coup[0] == "const"):
            raise PreconditionError("exact stepping needs piecewise q and constant coupling")
        th, lr = _prufer_exact_vec(sys, np.array([float(lam)]),
                                   np.array([float(theta0)]), x0, x1,
                                   coup[1], params)
        return PruferState(float(th[0]), float(lr[0]))
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    th, lr = _prufer_rk4(sys, float(lam), float(theta0), x0, x1, coup, params)
    return PruferState(th, lr)


def prufer_angles(sys: DiracSystem, lams, theta0: float, x0: float, x1: float,
                  l=None, params: NumericParams | None = None) -> np.ndarray:
    """Final angles for an array of lambda values (exact path where possible,
    otherwise a scalar loop)."""
    params = params or DEFAULT_PARAMS
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    coup = _resolve_coupling(sys, l)
    if sys.potential.is_piecewise and coup[0] == "const":
        th0 = np.full(lams.shape, float(theta0))
        th, _ = _prufer_exact_vec(sys, lams, th0, x0, x1, coup[1], params)
        return th
    return np.array([propagate_prufer(sys, la, theta0, x0, x1, l, params).theta
                     for la in lams])


def prufer_path(sys: DiracSystem, lam: float, theta0: float, x0: float,
                x1: float, l=None, params: NumericParams | None = None):
    """Exact-path propagation recording (x, theta) after every substep.

    Available for piecewise-constant q with constant coupling only.
    """
    params = params or DEFAULT_PARAMS
    coup = _resolve_coupling(sys, l)
    if not (sys.potential.is_piecewise and coup[0] == "const"):
        raise PreconditionError("prufer_path needs piecewise q and constant coupling")
    th, lr, xs, trace = _prufer_exact_vec(
        sys, np.array([float(lam)]), np.array([float(theta0)]), x0, x1,
        coup[1], params, record=True)
    return xs, trace[:, 0]


def solution_samples(sys: DiracSystem, lam: float, xs, u0, l=None,
                     params: NumericParams | None = None,
                     method: str = "auto") -> np.ndarray:
    """Values of the solution with u(xs[0]) = u0 at the sample points xs.

    u0 may be complex; the real transfer matrices act componentwise.
    """
    xs = np.asarray(xs, dtype=float)
    u = np.asarray(u0)
    out = np.empty((xs.size,) + u.shape, dtype=u.dtype)
    out[0] = u
    for i in range(1, xs.size):
        M = transfer_matrix(sys, lam, xs[i - 1], xs[i], l, params, method).as_array()
        u = M @ u
        out[i] = u
    return out
