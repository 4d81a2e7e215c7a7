"""Fixed-step RK4 and adaptive Dormand-Prince time stepping with a blow-up guard."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

BLOWUP_THRESHOLD = 1e12

Rhs = Callable[[float, np.ndarray], np.ndarray]


class BlowUpError(RuntimeError):
    """State left the finite region (non-finite or above the magnitude threshold)."""

    def __init__(self, t: float, message: str):
        super().__init__(f"blow-up at t={t:.6g}: {message}")
        self.t = t


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t_end: float
    dt: float | None = None
    tol: float | None = None
    sample_stride: int = 1

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if (self.dt is None) == (self.tol is None):
            raise ValueError("give exactly one of dt (fixed step) or tol (adaptive)")
        if self.dt is not None and not 0 < self.dt <= self.t_end - self.t0:
            raise ValueError(f"dt={self.dt} must lie in (0, t_end - t0]")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be a positive integer")

    @property
    def adaptive(self) -> bool:
        return self.tol is not None

    @property
    def span(self) -> float:
        return self.t_end - self.t0


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _check(t: float, y: np.ndarray):
    if not np.all(np.isfinite(y)):
        raise BlowUpError(t, "non-finite state component")
    if np.max(np.abs(y), initial=0.0) > BLOWUP_THRESHOLD:
        raise BlowUpError(t, f"component magnitude above {BLOWUP_THRESHOLD:g}")


def _rk4_step(rhs: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _fixed(rhs: Rhs, y: np.ndarray, grid: TimeGrid):
    n = max(1, math.ceil(grid.span / grid.dt - 1e-9))
    h = grid.span / n
    times, states = [grid.t0], [y.copy()]
    for i in range(1, n + 1):
        y = _rk4_step(rhs, grid.t0 + (i - 1) * h, y, h)
        _check(grid.t0 + i * h, y)
        if i % grid.sample_stride == 0 or i == n:
            times.append(grid.t0 + i * h)
            states.append(y.copy())
    return times, states


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


def _adaptive(rhs: Rhs, y: np.ndarray, grid: TimeGrid):
    tol = grid.tol
    t = grid.t0
    h = min(grid.span, 1e-3 * grid.span)
    times, states = [t], [y.copy()]
    k_first = rhs(t, y)
    accepted = 0
    while t < grid.t_end:
        h = min(h, grid.t_end - t)
        if h <= 1e-14 * max(1.0, abs(t)):
            raise BlowUpError(t, "step size underflow")
        ks = [k_first]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(rhs(t + _C[i] * h, yi))
        y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b)
        err_vec = h * sum(e * k for e, k in zip(_E, ks) if e)
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        err = float(np.sqrt(np.mean(np.abs(err_vec / scale) ** 2)))
        if not math.isfinite(err):
            raise BlowUpError(t, "non-finite error estimate")
        if err <= 1.0:
            t = t + h if t + h < grid.t_end else grid.t_end
            y = y_new
            _check(t, y)
            k_first = ks[6]
            accepted += 1
            if accepted % grid.sample_stride == 0 or t >= grid.t_end:
                times.append(t)
                states.append(y.copy())
        factor = 0.9 * err ** -0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return times, states


def integrate(rhs: Rhs, state0, grid: TimeGrid, metadata: dict | None = None) -> Trajectory:
    """Integrate y' = rhs(t, y) over ``grid``.

    ``state0`` may be an array of any shape (real or complex); batches of
    independent states integrate together when ``rhs`` is vectorized.
    Fixed-step runs use h = span / ceil(span / dt) so the last step lands on
    t_end; every ``sample_stride``-th step and the final step are recorded.
    """
    y = np.array(state0, dtype=np.result_type(np.asarray(state0), float))
    _check(grid.t0, y)
    # overflow inside a stage is reported by the guard, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        times, states = (_adaptive if grid.adaptive else _fixed)(rhs, y, grid)
    meta = dict(metadata or {})
    meta.setdefault("method", "dopri5" if grid.adaptive else "rk4")
    return Trajectory(np.asarray(times), np.asarray(states), meta)
