"""Decay certificates: bound curves checked sample by sample along trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .integrator import Trajectory
from .model import ModelParams, ModeState
from .observables import DEGENERATE_FLOOR, DegenerateChartError, diagnostic_series, fit_decay_rate

SLACK = 1e-8


@dataclass
class DecayCertificate:
    name: str
    checked_quantity: str
    bound_curve: Callable[[np.ndarray], np.ndarray]
    margin: float
    at_t: float
    passed: bool
    extras: dict = field(default_factory=dict)

    def report_line(self) -> str:
        line = (f"CERT {self.name} pass={str(self.passed).lower()} "
                f"worst_margin={self.margin:.6e} at_t={self.at_t:.6g}")
        for k, v in self.extras.items():
            line += f" {k}={v:.6e}" if isinstance(v, float) else f" {k}={v}"
        return line


def _fold(name: str, quantity: str, t: np.ndarray, q: np.ndarray, bound: Callable,
          mask: np.ndarray | None = None, lower: bool = False, slack: float = SLACK,
          **extras) -> DecayCertificate:
    """Worst signed gap of an upper (or lower) bound over the masked samples."""
    if mask is None:
        mask = np.ones_like(t, dtype=bool)
    if not np.any(mask):
        return DecayCertificate(name, quantity, bound, 0.0, float(t[0]), True, dict(extras, vacuous=True))
    ts, qs = t[mask], q[mask]
    bs = bound(ts)
    gap = (qs - bs) if lower else (bs - qs)
    allowed = slack * np.maximum(np.abs(bs), np.abs(qs))
    i = int(np.argmin(gap + allowed))
    worst = int(np.argmin(gap))
    passed = bool(gap[i] + allowed[i] >= 0)
    return DecayCertificate(name, quantity, bound, float(gap[worst]), float(ts[worst]), passed, dict(extras))


def _series(traj: Trajectory):
    states = np.asarray(traj.states)
    if states.ndim != 2 or states.shape[1] != 4:
        raise ValueError("expected a single reduced-model trajectory with states of shape (N, 4)")
    return np.asarray(traj.times, dtype=float), diagnostic_series(states)


def split_batch(traj: Trajectory) -> list[Trajectory]:
    """Split a batched trajectory (states of shape (N, M, 4)) into M runs."""
    states = np.asarray(traj.states)
    if states.ndim == 2:
        return [traj]
    return [Trajectory(traj.times, states[:, m], dict(traj.metadata, member=m)) for m in range(states.shape[1])]


def symmetric_certificates(traj: Trajectory, params: ModelParams, slack: float = SLACK) -> list[DecayCertificate]:
    """Energy, persistence-of-A and fast-B-decay bounds on the symmetric torus."""
    if params.delta != 1.0:
        raise ValueError("symmetric certificates require delta = 1")
    nu = params.nu
    t, d = _series(traj)
    A, B = d["A"], d["B"]
    A0, B0 = float(A[0]), float(B[0])
    t_fast = 1.0 / nu
    fast = 2.0 * A0 / (5.0 * nu * math.e**2)

    def b_bound(s):
        return B0 * np.exp(-fast * np.minimum(s, t_fast))

    return [
        _fold("sym_energy", "A+B", t, A + B, lambda s: (A0 + B0) * np.exp(-2.0 * nu * s), slack=slack),
        _fold("sym_A_lower", "A", t, A, lambda s: np.full_like(s, A0 * math.exp(-2.0)),
              mask=t <= t_fast * (1 + 1e-12), lower=True, slack=slack),
        _fold("sym_B_fast", "B", t, B, b_bound, slack=slack, rate=fast),
    ]


@dataclass(frozen=True)
class AsymmetricConstants:
    params: ModelParams
    eta: float
    A0: float
    B0: float
    K1: float
    K2: float
    D0: float
    B_star: float
    M0: float
    t_star: float
    gamma: float
    fast_phase: bool


def asymmetric_constants(params: ModelParams, A0: float, B0: float, eta: float | None = None,
                         allow_absent_fast_phase: bool = False) -> AsymmetricConstants:
    """Constants of the rapid-decay estimate for delta != 1.

    If B0 <= B_star the fast phase is absent: by default this is an error,
    with ``allow_absent_fast_phase`` the constants are built with t_star = 0.
    """
    nu, d = params.nu, params.delta
    d2 = d * d
    gap = abs(d2 - 1.0)
    if gap == 0.0:
        raise ValueError("asymmetric constants need delta != 1")
    eta = 2.0 * gap if eta is None else eta
    if not gap < eta:
        raise ValueError(f"need |delta^2 - 1| < eta, got eta={eta}")
    if not A0 > 0:
        raise ValueError("A0 must be positive")
    K1 = min(1.0, 1.0 / d2)
    K2 = 2.0 * max(1.0, 1.0 / d2) + 6.0 * math.sqrt(2.0) * math.sqrt(A0 + B0)
    D0 = min((1 + 3 * d2) / (d2 * (1 + d2) * (1 + 4 * d2)),
             d**6 * (3 + d2) / ((1 + d2) * (4 + d2)))
    B_star = 128.0 * nu**2 * eta**2 / (d2 * D0**2)
    M0 = D0 * A0 / (2.0 * math.exp(K2))
    fast_phase = B0 > B_star
    if fast_phase:
        t_star = -(nu / M0) * math.log(B_star / B0)
    elif allow_absent_fast_phase:
        t_star = 0.0
    else:
        raise ValueError(f"fast-phase-absent: B0={B0:.3e} <= B_star={B_star:.3e}")
    return AsymmetricConstants(params, eta, A0, B0, K1, K2, D0, B_star, M0, t_star,
                               2.0 * nu * (1.0 / d2 - 1.0), fast_phase)


def energy_rate(state: ModeState, params: ModelParams) -> float:
    """Closed form of dE/dt; every term is nonpositive."""
    nu, d = params.nu, params.delta
    d2 = d * d
    n1, n3, n5, n7 = (abs(complex(v)) ** 2 for v in state.as_array())
    B = n5 + n7
    return (-nu * (n1 / d2 + n3 + (1 + d2) / d2 * B)
            - d**8 / (2 * nu * (1 + d2) ** 2) * n1 * B
            - 1.0 / (2 * nu * d2 * (1 + d2) ** 2) * n3 * B)


def asymmetric_certificates(traj: Trajectory, consts: AsymmetricConstants,
                            slack: float = SLACK) -> list[DecayCertificate]:
    """Energy decay, fast and slow B decay, and persistence of A for delta != 1.

    M1 is measured: the smallest constant for which the slow B bound holds at
    the first sample at or after t_star, then checked on all later samples.
    """
    p = consts.params
    if p.delta == 1.0:
        raise ValueError("asymmetric certificates require delta != 1")
    nu, K1, eta = p.nu, consts.K1, consts.eta
    t, d = _series(traj)
    A, B, E = d["A"], d["B"], d["E"]
    A0, B0, E0 = float(A[0]), float(B[0]), float(E[0])

    energy = _fold("asym_energy", "E", t, E, lambda s: E0 * np.exp(-2.0 * K1 * nu * s), slack=slack)
    fast_mask = t <= consts.t_star * (1 + 1e-12)
    if not consts.fast_phase:
        fast_mask = np.zeros_like(t, dtype=bool)
    fast = _fold("asym_B_fast", "B", t, B, lambda s: B0 * np.exp(-(consts.M0 / nu) * s),
                 mask=fast_mask, slack=slack)

    late = np.nonzero(t >= consts.t_star)[0]
    slow_shape = eta**2 * nu**2 * np.exp(-2.0 * nu * K1 * t)
    M1 = float(B[late[0]] / slow_shape[late[0]]) if len(late) else 0.0
    slow = _fold("asym_B_slow", "B", t, B, lambda s: M1 * eta**2 * nu**2 * np.exp(-2.0 * nu * K1 * s),
                 mask=t >= consts.t_star, slack=slack, M1=M1)
    t1 = min(1.0 / nu, 1.0 / eta)
    lower = _fold("asym_A_lower", "A", t, A, lambda s: np.full_like(s, A0 * math.exp(-consts.K2)),
                  mask=t <= t1 * (1 + 1e-12), lower=True, slack=slack)
    return [energy, fast, slow, lower]


def _ratio_certificate(name: str, quantity: str, t: np.ndarray, q: np.ndarray, rate: float,
                       t_star: float) -> DecayCertificate:
    if np.all(q == 0):
        return DecayCertificate(name, quantity, lambda s: np.zeros_like(s), 0.0, float(t[0]), True,
                                {"M": 0.0, "fitted_rate": math.inf, "target_rate": rate})
    M = float(np.max(q * np.exp(rate * t)))
    fitted = fit_decay_rate(Trajectory(t, q[:, None]), lambda s: s[0], t_star=t_star)
    passed = fitted >= 0.9 * rate
    return DecayCertificate(name, quantity, lambda s: M * np.exp(-rate * s), fitted - 0.9 * rate,
                            float(t[-1]), bool(passed), {"M": M, "fitted_rate": fitted, "target_rate": rate})


def ratio_certificate(traj: Trajectory, consts: AsymmetricConstants, R0_cap: float = math.inf) -> DecayCertificate:
    """Decay of R = |w1|^2/|w3|^2 at rate gamma when delta < 1; M2 is measured."""
    if not consts.params.delta < 1.0:
        raise ValueError("ratio certificate needs delta < 1; use u_ratio_certificate for delta > 1")
    t, d = _series(traj)
    n3 = np.abs(np.asarray(traj.states)[:, 1]) ** 2
    if np.any(n3 < DEGENERATE_FLOOR):
        raise DegenerateChartError("degenerate-omega3 along the trajectory")
    R = d["R"]
    if R[0] > R0_cap:
        raise ValueError(f"R(0)={R[0]} exceeds the cap {R0_cap}")
    return _ratio_certificate("ratio_R", "R", t, R, consts.gamma, consts.t_star)


def u_ratio_certificate(traj: Trajectory, consts: AsymmetricConstants, U0_cap: float = math.inf) -> DecayCertificate:
    """Mirror of ratio_certificate for delta > 1 with U = 1/R and rate 2 nu (1 - 1/delta^2)."""
    if not consts.params.delta > 1.0:
        raise ValueError("U-ratio certificate needs delta > 1")
    t, d = _series(traj)
    n1 = np.abs(np.asarray(traj.states)[:, 0]) ** 2
    if np.any(n1 < DEGENERATE_FLOOR):
        raise DegenerateChartError("degenerate-omega1 along the trajectory")
    U = d["U"]
    if U[0] > U0_cap:
        raise ValueError(f"U(0)={U[0]} exceeds the cap {U0_cap}")
    return _ratio_certificate("ratio_U", "U", t, U, -consts.gamma, consts.t_star)


def b_rate_bound(params: ModelParams, A: float) -> float:
    """Exponent 2A/(5 nu e^2) of the fast B bound; increasing in A."""
    return 2.0 * A / (5.0 * params.nu * math.e**2)

