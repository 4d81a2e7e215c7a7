"""Eight-mode reduced model of 2D Navier-Stokes on the torus [0, 2*pi*delta] x [0, 2*pi].

The state holds the four independent complex amplitudes

    omega1 = w(1, 0),  omega3 = w(0, 1),  omega5 = w(1, 1),  omega7 = w(1, -1)

of the vorticity Fourier series. The remaining four retained modes are their
conjugates (w(-k) = conj(w(k)) for a real field) and are never stored.

Modes (+-2, +-1) and (+-1, +-2) are slaved to the retained ones through a
quadratic center-manifold graph; (+-2, 0) and (0, +-2) are set to zero, which
makes the delta = 1 model the continuous limit of the delta != 1 one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DELTA_MIN = math.sqrt(2.0 / 3.0)
DELTA_MAX = math.sqrt(3.0 / 2.0)

# Wavevectors of the stored amplitudes, in storage order.
MODE_WAVEVECTORS = ((1, 0), (0, 1), (1, 1), (1, -1))
# Slaved modes, in CenterGraphValues field order.
GRAPH_WAVEVECTORS = ((2, 1), (2, -1), (1, 2), (1, -2))


class AdmissibilityError(ValueError):
    """Raised for (nu, delta) outside the window where the reduction is unique."""


@dataclass(frozen=True)
class ModelParams:
    nu: float
    delta: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise AdmissibilityError(f"viscosity must be positive, got nu={self.nu!r}")
        if not (DELTA_MIN < self.delta < DELTA_MAX):
            raise AdmissibilityError(
                f"delta={self.delta!r} outside the admissible window "
                f"({DELTA_MIN:.6f}, {DELTA_MAX:.6f})"
            )

    @property
    def symmetric(self) -> bool:
        return self.delta == 1.0


@dataclass(frozen=True)
class ModeState:
    omega1: complex = 0j
    omega3: complex = 0j
    omega5: complex = 0j
    omega7: complex = 0j

    def as_array(self) -> np.ndarray:
        return np.array([self.omega1, self.omega3, self.omega5, self.omega7], dtype=complex)

    @classmethod
    def from_array(cls, values) -> "ModeState":
        w = np.asarray(values, dtype=complex)
        if w.shape != (4,):
            raise ValueError(f"expected 4 complex amplitudes, got shape {w.shape}")
        return cls(*(complex(v) for v in w))

    def scaled(self, factor: float) -> "ModeState":
        return ModeState.from_array(factor * self.as_array())

    def implicit_modes(self) -> dict[tuple[int, int], complex]:
        """All eight retained amplitudes keyed by wavevector, conjugates included."""
        out = {}
        for k, v in zip(MODE_WAVEVECTORS, self.as_array()):
            out[k] = complex(v)
            out[(-k[0], -k[1])] = complex(np.conj(v))
        return out


@dataclass(frozen=True)
class CenterGraphValues:
    w21: complex
    w2m1: complex
    w12: complex
    w1m2: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.w21, self.w2m1, self.w12, self.w1m2], dtype=complex)


class _Coefficients(NamedTuple):
    lin1: float  # nu / delta^2
    lin3: float  # nu
    lin57: float  # nu (1 + delta^2) / delta^2
    quad1: float
    quad3: float
    force57: float  # (delta^2 - 1) / delta
    cubic1: float
    cubic3: float
    damp5_1: float  # coefficient of omega_{5,7} |omega1|^2
    damp5_3: float  # coefficient of omega_{5,7} |omega3|^2


def _coefficients(params: ModelParams) -> _Coefficients:
    nu, d = params.nu, params.delta
    d2 = d * d
    return _Coefficients(
        lin1=nu / d2,
        lin3=nu,
        lin57=nu * (1.0 + d2) / d2,
        quad1=1.0 / (d * (1.0 + d2)),
        quad3=d**3 / (1.0 + d2),
        force57=(d2 - 1.0) / d,
        cubic1=3.0 * d**6 / (2.0 * nu * (4.0 + d2) * (1.0 + d2) ** 2),
        cubic3=3.0 * d2 / (2.0 * nu * (1.0 + 4.0 * d2) * (1.0 + d2) ** 2),
        damp5_1=d**6 * (3.0 + d2) / (2.0 * nu * (4.0 + d2) * (1.0 + d2)),
        damp5_3=(1.0 + 3.0 * d2) / (2.0 * nu * d2 * (1.0 + 4.0 * d2) * (1.0 + d2)),
    )


def reduced_field(omega: np.ndarray, params: ModelParams) -> np.ndarray:
    """Vectorized right-hand side on arrays of shape (..., 4)."""
    omega = np.asarray(omega, dtype=complex)
    if not np.all(np.isfinite(omega)):
        raise ValueError("state has non-finite components")
    c = _coefficients(params)
    w1, w3, w5, w7 = omega[..., 0], omega[..., 1], omega[..., 2], omega[..., 3]
    a1 = w1.real**2 + w1.imag**2
    a3 = w3.real**2 + w3.imag**2
    b = w5.real**2 + w5.imag**2 + w7.real**2 + w7.imag**2
    w1c, w3c = np.conj(w1), np.conj(w3)
    damp = c.lin57 + c.damp5_1 * a1 + c.damp5_3 * a3
    out = np.empty_like(omega)
    out[..., 0] = -c.lin1 * w1 + c.quad1 * (w3 * w7 - w3c * w5) + c.cubic1 * w1 * b
    out[..., 1] = -c.lin3 * w3 + c.quad3 * (w1c * w5 - w1 * np.conj(w7)) + c.cubic3 * w3 * b
    out[..., 2] = -damp * w5 - c.force57 * w1 * w3
    out[..., 3] = -damp * w7 + c.force57 * w1 * w3c
    return out


def reduced_rhs(state, params: ModelParams):
    """Time derivative of the reduced model.

    Accepts a ModeState (returns a ModeState) or a complex array of shape
    (..., 4) (returns an array of the same shape).
    """
    if isinstance(state, ModeState):
        return ModeState.from_array(reduced_field(state.as_array(), params))
    return reduced_field(state, params)


def _graph_factors(params: ModelParams) -> tuple[float, float]:
    nu, d = params.nu, params.delta
    return d**5 / (2.0 * nu * (1.0 + d * d)), 1.0 / (2.0 * nu * d * (1.0 + d * d))


def center_graph(state: ModeState, params: ModelParams) -> CenterGraphValues:
    """Quadratic center-manifold values of w(2,1), w(2,-1), w(1,2), w(1,-2)."""
    w = state.as_array()
    if not np.all(np.isfinite(w)):
        raise ValueError("state has non-finite components")
    x, y = _graph_factors(params)
    w1, w3, w5, w7 = (complex(v) for v in w)
    return CenterGraphValues(
        w21=-x * w1 * w5,
        w2m1=x * w1 * w7,
        w12=y * w3 * w5,
        w1m2=-y * w3.conjugate() * w7,
    )


def _graph_rates(state: ModeState, deriv: ModeState, params: ModelParams) -> np.ndarray:
    """Chain-rule time derivative of the graph values along ``deriv``."""
    x, y = _graph_factors(params)
    w1, w3, w5, w7 = (complex(v) for v in state.as_array())
    d1, d3, d5, d7 = (complex(v) for v in deriv.as_array())
    return np.array([
        -x * (d1 * w5 + w1 * d5),
        x * (d1 * w7 + w1 * d7),
        y * (d3 * w5 + w3 * d5),
        -y * (d3.conjugate() * w7 + w3.conjugate() * d7),
    ])


def interaction_coefficient(j, l, delta: float) -> float:
    """Symmetrized triad weight of w_j w_l in the equation for w_{j+l}."""
    nj = j[0] ** 2 + delta**2 * j[1] ** 2
    nl = l[0] ** 2 + delta**2 * l[1] ** 2
    cross = j[1] * l[0] - j[0] * l[1]
    return -0.5 * delta * cross * (1.0 / nl - 1.0 / nj)


def _closure_modes(state: ModeState, params: ModelParams) -> tuple[dict, set]:
    modes = state.implicit_modes()
    graph = center_graph(state, params).as_array()
    slaved = set()
    for k, v in zip(GRAPH_WAVEVECTORS, graph):
        modes[k] = complex(v)
        modes[(-k[0], -k[1])] = complex(np.conj(v))
        slaved.update({k, (-k[0], -k[1])})
    return modes, slaved


def graph_invariance_defect(state: ModeState, params: ModelParams, scale: float = 1.0) -> float:
    """Max-norm mismatch between the two time derivatives of the slaved modes.

    At ``scale * state`` the derivative of each graph value obtained by the
    chain rule along the reduced flow is compared with the vorticity equation
    for that mode, evaluated with the graph substituted and truncated to
    products of retained modes (slaved x slaved products are dropped). The
    graph is exact to quadratic order, so the defect is O(scale**3).
    """
    if not 0 < scale <= 1:
        raise ValueError(f"scale must lie in (0, 1], got {scale!r}")
    s = state.scaled(scale)
    chain = _graph_rates(s, reduced_rhs(s, params), params)

    modes, slaved = _closure_modes(s, params)
    d, nu = params.delta, params.nu
    flow = np.empty(4, dtype=complex)
    for i, k in enumerate(GRAPH_WAVEVECTORS):
        total = -(nu / d**2) * (k[0] ** 2 + d**2 * k[1] ** 2) * modes[k]
        for j, wj in modes.items():
            l = (k[0] - j[0], k[1] - j[1])
            if l not in modes or (j in slaved and l in slaved):
                continue
            total += interaction_coefficient(j, l, d) * wj * modes[l]
        flow[i] = total
    return float(np.max(np.abs(chain - flow)))


def closure_rhs(state: ModeState, params: ModelParams) -> ModeState:
    """Reduced derivative rebuilt from the vorticity equation plus the graph.

    Independent route to ``reduced_rhs``: triads among the twelve modes
    (retained and slaved) are summed directly, dropping slaved x slaved
    products. Agrees with ``reduced_rhs`` to rounding.
    """
    modes, slaved = _closure_modes(state, params)
    d, nu = params.delta, params.nu
    out = []
    for k in MODE_WAVEVECTORS:
        total = -(nu / d**2) * (k[0] ** 2 + d**2 * k[1] ** 2) * modes[k]
        for j, wj in modes.items():
            l = (k[0] - j[0], k[1] - j[1])
            if l not in modes or (j in slaved and l in slaved):
                continue
            total += interaction_coefficient(j, l, d) * wj * modes[l]
        out.append(total)
    return ModeState(*out)


def real_to_modes(x: np.ndarray) -> np.ndarray:
    """(..., 8) reals laid out re1, im1, re3, im3, ... -> (..., 4) complex."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def modes_to_real(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape[:-1] + (8,))
    out[..., 0::2] = w.real
    out[..., 1::2] = w.imag
    return out
