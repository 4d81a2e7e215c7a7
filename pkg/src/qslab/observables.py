"""Phase-reduced observables of the reduced model and their vector field.

The observables are

    R = |w1|^2/|w3|^2,  A = |w1|^2 + |w3|^2,  w = |w5|^2,  z = |w7|^2,
    P = w1 conj(w3) conj(w7)/|w3|^2,  Q = conj(w1) conj(w3) w5/|w3|^2.

On the symmetric torus they close into an autonomous system with a line of
equilibria (r, 0, ..., 0), one for every ratio r > 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .integrator import Trajectory
from .model import ModelParams, ModeState, _coefficients, reduced_field

DEGENERATE_FLOOR = 1e-30

OBSERVABLE_NAMES = ("R", "A", "w", "z", "P_re", "P_im", "Q_re", "Q_im")


class DegenerateChartError(ValueError):
    """|omega3| (or R) is below the floor; the mirrored chart is needed."""


@dataclass(frozen=True)
class ObservableState:
    R: float
    A: float
    w: float
    z: float
    P: complex
    Q: complex

    def as_real(self) -> np.ndarray:
        return np.array([self.R, self.A, self.w, self.z,
                         self.P.real, self.P.imag, self.Q.real, self.Q.imag])

    @classmethod
    def from_real(cls, x) -> "ObservableState":
        x = np.asarray(x, dtype=float)
        if x.shape != (8,):
            raise ValueError(f"expected 8 real observables, got shape {x.shape}")
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]),
                   complex(x[4], x[5]), complex(x[6], x[7]))


@dataclass(frozen=True)
class Diagnostics:
    A: float
    B: float
    E: float
    R: float | None
    U: float | None


def to_observables(state: ModeState, floor: float = DEGENERATE_FLOOR) -> ObservableState:
    w1, w3, w5, w7 = (complex(v) for v in state.as_array())
    n3 = abs(w3) ** 2
    if n3 < floor:
        raise DegenerateChartError("degenerate-omega3: |omega3|^2 below floor, use the mirrored chart")
    n1 = abs(w1) ** 2
    return ObservableState(
        R=n1 / n3,
        A=n1 + n3,
        w=abs(w5) ** 2,
        z=abs(w7) ** 2,
        P=w1 * w3.conjugate() * w7.conjugate() / n3,
        Q=w1.conjugate() * w3.conjugate() * w5 / n3,
    )


def observable_field(x: np.ndarray, nu: float, floor: float = DEGENERATE_FLOOR) -> np.ndarray:
    """Real eight-component field on arrays of shape (..., 8), symmetric torus."""
    x = np.asarray(x, dtype=float)
    R, A, w, z, pr, pi, qr, qi = np.moveaxis(x, -1, 0)
    if np.any(R < floor):
        raise DegenerateChartError("division hazard: R below floor")
    inv = 1.0 / R
    drift = pr - qr
    damp = 2.0 * nu + A / (5.0 * nu)
    out = np.empty_like(x)
    out[..., 0] = (1.0 + R) * drift
    out[..., 1] = -2.0 * nu * A + 3.0 / (20.0 * nu) * A * (w + z)
    out[..., 2] = -4.0 * nu * w - 2.0 / (5.0 * nu) * w * A
    out[..., 3] = -4.0 * nu * z - 2.0 / (5.0 * nu) * z * A
    out[..., 4] = (-damp * pr + 0.5 * z * (1.0 - R) + drift * pr
                   + 0.5 * pr * qr * (1.0 - inv) + 0.5 * pi * qi * (1.0 + inv))
    out[..., 5] = (-damp * pi + drift * pi
                   + 0.5 * pi * qr * (1.0 - inv) - 0.5 * pr * qi * (1.0 + inv))
    out[..., 6] = (-damp * qr + 0.5 * w * (R - 1.0) + drift * qr
                   + 0.5 * pr * qr * (inv - 1.0) - 0.5 * pi * qi * (inv + 1.0))
    out[..., 7] = (-damp * qi + drift * qi
                   + 0.5 * pi * qr * (inv + 1.0) + 0.5 * pr * qi * (inv - 1.0))
    return out


def _require_symmetric(params: ModelParams):
    if params.delta != 1.0:
        raise ValueError("the observable system is closed only on the symmetric torus (delta = 1)")


def observable_rhs(obs: ObservableState, params: ModelParams) -> ObservableState:
    _require_symmetric(params)
    return ObservableState.from_real(observable_field(obs.as_real(), params.nu))


def observable_rhs_complex(obs: ObservableState, params: ModelParams) -> ObservableState:
    """Same field written with complex P and Q; used to cross-check the real split."""
    _require_symmetric(params)
    nu, R, A, P, Q = params.nu, obs.R, obs.A, obs.P, obs.Q
    if R < DEGENERATE_FLOOR:
        raise DegenerateChartError("division hazard: R below floor")
    drift = P.real - Q.real
    dP = (-2 * nu * P + obs.z / 2 * (1 - R) - P * A / (5 * nu) + P * drift
          + P / 2 * (Q.conjugate() - Q / R))
    dQ = (-2 * nu * Q + obs.w / 2 * (R - 1) - Q * A / (5 * nu) + Q * drift
          + Q / 2 * (P / R - P.conjugate()))
    return ObservableState(
        R=(1 + R) * drift,
        A=-2 * nu * A + 3 / (20 * nu) * A * (obs.w + obs.z),
        w=-4 * nu * obs.w - 2 / (5 * nu) * obs.w * A,
        z=-4 * nu * obs.z - 2 / (5 * nu) * obs.z * A,
        P=dP,
        Q=dQ,
    )


def ab_rhs(A: float, B: float, params: ModelParams) -> tuple[float, float]:
    _require_symmetric(params)
    nu = params.nu
    return (-2.0 * nu * A + 3.0 / (20.0 * nu) * A * B,
            -4.0 * nu * B - 2.0 / (5.0 * nu) * A * B)


def diagnostics(state: ModeState, floor: float = DEGENERATE_FLOOR) -> Diagnostics:
    n1, n3, n5, n7 = (abs(complex(v)) ** 2 for v in state.as_array())
    A, B = n1 + n3, n5 + n7
    return Diagnostics(
        A=A, B=B, E=0.5 * (A + B),
        R=n1 / n3 if n3 >= floor else None,
        U=n3 / n1 if n1 >= floor else None,
    )


def diagnostic_series(states: np.ndarray, floor: float = DEGENERATE_FLOOR) -> dict[str, np.ndarray]:
    """A, B, E, R, U along an array of mode states (..., 4); absent values are NaN."""
    mags = np.abs(np.asarray(states, dtype=complex)) ** 2
    n1, n3 = mags[..., 0], mags[..., 1]
    A, B = n1 + n3, mags[..., 2] + mags[..., 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(n3 >= floor, n1 / np.where(n3 > 0, n3, 1.0), np.nan)
        U = np.where(n1 >= floor, n3 / np.where(n1 > 0, n1, 1.0), np.nan)
    return {"A": A, "B": B, "E": 0.5 * (A + B), "R": R, "U": U}


def _quantity(traj: Trajectory, quantity) -> np.ndarray:
    if callable(quantity):
        return np.asarray([quantity(s) for s in traj.states], dtype=float)
    return diagnostic_series(traj.states)[quantity]


def fit_decay_rate(traj: Trajectory, quantity: str | Callable = "A",
                   window: tuple[float, float] | None = None, t_star: float = 0.0) -> float:
    """Negated least-squares slope of log(quantity) against t over ``window``.

    Without a window, the last half of the samples after ``t_star`` is used.
    """
    t = np.asarray(traj.times)
    q = _quantity(traj, quantity)
    if window is None:
        idx = np.nonzero(t >= t_star)[0]
        idx = idx[len(idx) // 2:]
    else:
        ta, tb = window
        if ta < t[0] - 1e-12 or tb > t[-1] + 1e-12 or not ta < tb:
            raise ValueError(f"window {window} outside the trajectory span [{t[0]}, {t[-1]}]")
        idx = np.nonzero((t >= ta) & (t <= tb))[0]
    if len(idx) < 2:
        raise ValueError("fewer than two samples in the fit window")
    vals = q[idx]
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise ValueError("quantity must be strictly positive on the fit window")
    slope = np.polyfit(t[idx], np.log(vals), 1)[0]
    return float(-slope)


def pushforward(state: ModeState, deriv: ModeState, floor: float = DEGENERATE_FLOOR) -> ObservableState:
    """Exact directional derivative of to_observables at ``state`` along ``deriv``."""
    w1, w3, w5, w7 = (complex(v) for v in state.as_array())
    d1, d3, d5, d7 = (complex(v) for v in deriv.as_array())
    n3 = abs(w3) ** 2
    if n3 < floor:
        raise DegenerateChartError("degenerate-omega3")
    n1 = abs(w1) ** 2
    dn1 = 2.0 * (w1.conjugate() * d1).real
    dn3 = 2.0 * (w3.conjugate() * d3).real
    P = w1 * w7.conjugate() / w3
    Q = w1.conjugate() * w5 / w3
    return ObservableState(
        R=(dn1 * n3 - n1 * dn3) / n3**2,
        A=dn1 + dn3,
        w=2.0 * (w5.conjugate() * d5).real,
        z=2.0 * (w7.conjugate() * d7).real,
        P=(d1 * w7.conjugate() + w1 * d7.conjugate() - P * d3) / w3,
        Q=(d1.conjugate() * w5 + w1.conjugate() * d5 - Q * d3) / w3,
    )


def pushforward_fd(state: ModeState, deriv: ModeState, step: float = 1e-6) -> ObservableState:
    """Central-difference directional derivative of to_observables."""
    w, d = state.as_array(), deriv.as_array()
    scale = step * max(1.0, float(np.max(np.abs(w)))) / max(float(np.max(np.abs(d))), 1e-300)
    plus = to_observables(ModeState.from_array(w + scale * d)).as_real()
    minus = to_observables(ModeState.from_array(w - scale * d)).as_real()
    return ObservableState.from_real((plus - minus) / (2.0 * scale))


def reduced_pushforward(state: ModeState, params: ModelParams, analytic: bool = True) -> ObservableState:
    deriv = ModeState.from_array(reduced_field(state.as_array(), params))
    return pushforward(state, deriv) if analytic else pushforward_fd(state, deriv)


def ratio_rate(state: ModeState, params: ModelParams) -> float:
    """Closed form of dR/dt for any admissible delta.

    dR/dt = -gamma R + 2 (c3 - c5) R B + 2 (c2 + c4 R) T / |w3|^2 with
    T = Re(conj(w1) w3 w7 - conj(w1) conj(w3) w5). The phase term T keeps this
    from closing in (R, A, w, z); it is used only as a pointwise identity.
    """
    w1, w3, w5, w7 = (complex(v) for v in state.as_array())
    n3 = abs(w3) ** 2
    if n3 < DEGENERATE_FLOOR:
        raise DegenerateChartError("degenerate-omega3")
    c = _coefficients(params)
    R = abs(w1) ** 2 / n3
    B = abs(w5) ** 2 + abs(w7) ** 2
    gamma = 2.0 * (c.lin1 - c.lin3)
    T = (w1.conjugate() * w3 * w7 - w1.conjugate() * w3.conjugate() * w5).real
    return -gamma * R + 2.0 * (c.cubic1 - c.cubic3) * R * B + 2.0 * (c.quad1 + c.quad3 * R) * T / n3


def realizability_defect(obs: ObservableState) -> float:
    """Relative mismatch in |P||Q| = R sqrt(w z)."""
    lhs = abs(obs.P) * abs(obs.Q)
    rhs = obs.R * math.sqrt(obs.w * obs.z)
    return abs(lhs - rhs) / max(lhs, rhs, 1e-300)
