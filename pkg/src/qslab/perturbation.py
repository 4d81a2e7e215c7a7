"""Slow-fast rescaling near the symmetric torus and its first-order asymptotics.

With delta = 1 + eps0*eps, nu = eps^alpha nu0, tau = eps^alpha t, low modes
w1,3 = eps^beta Omega1,3 and high modes w5,7 = eps^phi Omega5,7 (beta = alpha - 1/2,
phi = alpha) the reduced model becomes

    dOmega1 = -c1 nu0 Omega1 + c2 (Omega3 Omega7 - conj(Omega3) Omega5) + c3/nu0 Omega1 B
    dOmega3 = -nu0 Omega3 + c4 (conj(Omega1) Omega5 - Omega1 conj(Omega7)) + c5/nu0 Omega3 B
    dOmega5 = -Omega5 (c6 |Omega1|^2 + c7 |Omega3|^2)/(eps nu0) - c8 nu0 Omega5 - (c9/eps) Omega1 Omega3
    dOmega7 = -Omega7 (c6 |Omega1|^2 + c7 |Omega3|^2)/(eps nu0) - c8 nu0 Omega7 + (c9/eps) Omega1 conj(Omega3)

where the c's are rational functions of delta, expanded here in powers of eps.
The system does not depend on alpha. High modes relax on the fast time tau/eps.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .integrator import TimeGrid, integrate
from .model import ModelParams


class _Series:
    """Truncated power series in eps with exact rational coefficients."""

    __slots__ = ("c",)
    N = 4

    def __init__(self, coeffs):
        c = [Fraction(x) for x in coeffs][: self.N]
        self.c = c + [Fraction(0)] * (self.N - len(c))

    @classmethod
    def lift(cls, x):
        return x if isinstance(x, _Series) else cls([x])

    def __add__(self, other):
        o = _Series.lift(other)
        return _Series([a + b for a, b in zip(self.c, o.c)])

    __radd__ = __add__

    def __neg__(self):
        return _Series([-a for a in self.c])

    def __sub__(self, other):
        return self + (-_Series.lift(other))

    def __rsub__(self, other):
        return _Series.lift(other) - self

    def __mul__(self, other):
        o = _Series.lift(other)
        out = [Fraction(0)] * self.N
        for i, a in enumerate(self.c):
            if a:
                for j in range(self.N - i):
                    out[i + j] += a * o.c[j]
        return _Series(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = _Series([1])
        for _ in range(n):
            out = out * self
        return out

    def __truediv__(self, other):
        o = _Series.lift(other)
        if o.c[0] == 0:
            raise ZeroDivisionError("series with zero constant term")
        q = [Fraction(0)] * self.N
        for k in range(self.N):
            q[k] = (self.c[k] - sum(q[i] * o.c[k - i] for i in range(k))) / o.c[0]
        return _Series(q)

    def __rtruediv__(self, other):
        return _Series.lift(other) / self


# The nine coefficient functions of delta. Written with plain arithmetic so the
# same expressions evaluate on floats and on exact series.
COEFFICIENT_FUNCTIONS = {
    1: lambda d: 1 / d**2,
    2: lambda d: 1 / (d * (1 + d**2)),
    3: lambda d: 3 * d**6 / (2 * (4 + d**2) * (1 + d**2) ** 2),
    4: lambda d: d**3 / (1 + d**2),
    5: lambda d: 3 * d**2 / (2 * (1 + 4 * d**2) * (1 + d**2) ** 2),
    6: lambda d: d**6 * (3 + d**2) / (2 * (4 + d**2) * (1 + d**2)),
    7: lambda d: (1 + 3 * d**2) / (2 * d**2 * (1 + 4 * d**2) * (1 + d**2)),
    8: lambda d: (1 + d**2) / d**2,
    9: lambda d: (d**2 - 1) / d,
}
# Coefficients that sit behind a 1/eps in the fast equations.
_FAST = (6, 7, 9)


@dataclass(frozen=True)
class CoefficientSeries:
    epsilon0: int
    terms: dict  # i -> tuple of exact Taylor coefficients (Fraction), j = 0..3

    def c(self, i: int, j: int) -> Fraction:
        return self.terms[i][j]

    @property
    def c0(self) -> dict:
        return {i: t[0] for i, t in self.terms.items()}

    @property
    def c1(self) -> dict:
        return {i: t[1] for i, t in self.terms.items()}

    def truncated(self, i: int, eps: float, order: int) -> float:
        return float(sum(float(self.terms[i][j]) * eps**j for j in range(order + 1)))


def coefficient_series(epsilon0: int) -> CoefficientSeries:
    """Exact Taylor coefficients of the nine coefficient functions at delta = 1."""
    if epsilon0 not in (1, -1):
        raise ValueError("epsilon0 must be +1 or -1")
    delta = _Series([1, epsilon0])
    return CoefficientSeries(epsilon0, {i: tuple(f(delta).c) for i, f in COEFFICIENT_FUNCTIONS.items()})


@dataclass(frozen=True)
class PerturbationConfig:
    epsilon: float
    epsilon0: int = 1
    nu0: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.epsilon0 not in (1, -1):
            raise ValueError("epsilon0 must be +1 or -1")
        if not self.nu0 > 0:
            raise ValueError("nu0 must be positive")
        if not self.alpha > 0.5:
            raise ValueError("alpha must exceed 1/2")

    @property
    def beta(self) -> float:
        return self.alpha - 0.5

    @property
    def phi(self) -> float:
        return self.alpha

    @property
    def sigma(self) -> float:
        return self.beta - self.alpha

    @property
    def rho(self) -> float:
        return self.phi - self.alpha

    @property
    def delta(self) -> float:
        return 1.0 + self.epsilon0 * self.epsilon

    @property
    def nu(self) -> float:
        return self.epsilon**self.alpha * self.nu0

    def model_params(self) -> ModelParams:
        return ModelParams(self.nu, self.delta)

    def to_scaled(self, omega: np.ndarray) -> np.ndarray:
        """Original amplitudes (..., 4) -> scaled amplitudes."""
        omega = np.asarray(omega, dtype=complex)
        f = np.array([self.epsilon**-self.beta] * 2 + [self.epsilon**-self.phi] * 2)
        return omega * f

    def from_scaled(self, Omega: np.ndarray) -> np.ndarray:
        Omega = np.asarray(Omega, dtype=complex)
        f = np.array([self.epsilon**self.beta] * 2 + [self.epsilon**self.phi] * 2)
        return Omega * f

    def to_time(self, tau):
        return np.asarray(tau) * self.epsilon**-self.alpha


def _effective_coefficients(config: PerturbationConfig, order: int | None) -> dict[int, float]:
    """Coefficient values entering the scaled field.

    ``order=None`` evaluates the functions exactly (an exact change of
    variables). An integer order keeps every term of the field up to eps**order:
    coefficients divided by eps keep one more Taylor term.
    """
    if order is None:
        return {i: f(config.delta) for i, f in COEFFICIENT_FUNCTIONS.items()}
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1, 2 or None")
    s = coefficient_series(config.epsilon0)
    return {i: s.truncated(i, config.epsilon, order + 1 if i in _FAST else order)
            for i in COEFFICIENT_FUNCTIONS}


def scaled_field(Omega: np.ndarray, config: PerturbationConfig, order: int | None = 1) -> np.ndarray:
    """Vectorized tau-derivative of the scaled amplitudes, shape (..., 4)."""
    c = _effective_coefficients(config, order)
    eps, nu0 = config.epsilon, config.nu0
    W = np.asarray(Omega, dtype=complex)
    o1, o3, o5, o7 = W[..., 0], W[..., 1], W[..., 2], W[..., 3]
    B = np.abs(o5) ** 2 + np.abs(o7) ** 2
    fast = (c[6] * np.abs(o1) ** 2 + c[7] * np.abs(o3) ** 2) / (eps * nu0) + c[8] * nu0
    out = np.empty_like(W)
    out[..., 0] = -c[1] * nu0 * o1 + c[2] * (o3 * o7 - np.conj(o3) * o5) + c[3] / nu0 * o1 * B
    out[..., 1] = -nu0 * o3 + c[4] * (np.conj(o1) * o5 - o1 * np.conj(o7)) + c[5] / nu0 * o3 * B
    out[..., 2] = -fast * o5 - c[9] / eps * o1 * o3
    out[..., 3] = -fast * o7 + c[9] / eps * o1 * np.conj(o3)
    return out


def scaled_rhs(Omega, config: PerturbationConfig, order: int | None = 1) -> np.ndarray:
    return scaled_field(np.asarray(Omega, dtype=complex), config, order)


@dataclass(frozen=True)
class AsymptoticSolution:
    """Leading and first-order terms of the slow expansion plus the magnitudes.

    X and Y are |Omega1|^2 and |Omega3|^2; X0, Y0 are their order-0 initial
    values and X1_0, Y1_0 the order-1 initial corrections.
    """

    config: PerturbationConfig
    O10: complex
    O30: complex
    O11_0: complex
    O31_0: complex

    @property
    def X0(self) -> float:
        return abs(self.O10) ** 2

    @property
    def Y0(self) -> float:
        return abs(self.O30) ** 2

    @property
    def S0(self) -> float:
        return self.X0 + self.Y0

    @property
    def X1_0(self) -> float:
        return 2.0 * (self.O10.conjugate() * self.O11_0).real

    @property
    def Y1_0(self) -> float:
        return 2.0 * (self.O30.conjugate() * self.O31_0).real

    @property
    def K(self) -> float:
        return 20.0 * self.X0 * self.Y0 / self.S0

    def omega10(self, tau):
        return self.O10 * np.exp(-self.config.nu0 * np.asarray(tau))

    def omega30(self, tau):
        return self.O30 * np.exp(-self.config.nu0 * np.asarray(tau))

    @property
    def omega51(self) -> complex:
        c = self.config
        return -10.0 * c.nu0 * c.epsilon0 * self.O10 * self.O30 / self.S0

    @property
    def omega71(self) -> complex:
        c = self.config
        return 10.0 * c.nu0 * c.epsilon0 * self.O10 * self.O30.conjugate() / self.S0

    def omega11(self, tau):
        c, tau = self.config, np.asarray(tau)
        decay = np.exp(-c.nu0 * tau)
        growth = 2.0 * self.O10 + 10.0 * self.Y0 * self.O10 / self.S0
        return self.O11_0 * decay + c.nu0 * c.epsilon0 * tau * decay * growth

    def omega31(self, tau):
        c, tau = self.config, np.asarray(tau)
        decay = np.exp(-c.nu0 * tau)
        return self.O31_0 * decay - c.nu0 * c.epsilon0 * tau * decay * 10.0 * self.X0 * self.O30 / self.S0

    def X_bar(self, tau):
        c, tau = self.config, np.asarray(tau)
        inner = self.X0 + c.epsilon * (self.X1_0 + c.epsilon0 * c.nu0 * (self.K + 4.0 * self.X0) * tau)
        return np.exp(-2.0 * c.nu0 * tau) * inner

    def Y_bar(self, tau):
        c, tau = self.config, np.asarray(tau)
        inner = self.Y0 + c.epsilon * (self.Y1_0 - c.epsilon0 * c.nu0 * self.K * tau)
        return np.exp(-2.0 * c.nu0 * tau) * inner

    def slow_manifold_residual(self, tau) -> float:
        """Defect of the order-eps algebraic relations fixing Omega51 and Omega71."""
        c = self.config
        o1, o3 = self.omega10(tau), self.omega30(tau)
        s = np.abs(o1) ** 2 + np.abs(o3) ** 2
        r5 = -self.omega51 * s / (5.0 * c.nu0) - 2.0 * c.epsilon0 * o1 * o3
        r7 = -self.omega71 * s / (5.0 * c.nu0) + 2.0 * c.epsilon0 * o1 * np.conj(o3)
        return float(max(np.max(np.abs(r5)), np.max(np.abs(r7))))


def asymptotic_solution(config: PerturbationConfig, O10: complex, O30: complex,
                        O11_0: complex = 0j, O31_0: complex = 0j) -> AsymptoticSolution:
    if abs(O10) ** 2 + abs(O30) ** 2 == 0:
        raise ValueError("zero-denominator: both order-0 low modes vanish")
    return AsymptoticSolution(config, complex(O10), complex(O30), complex(O11_0), complex(O31_0))


def critical_times(sol: AsymptoticSolution, config: PerturbationConfig | None = None) -> tuple[float, float]:
    """(tau_plus, tau_minus): vanishing times of Y_bar (eps0 = +1) and X_bar (eps0 = -1)."""
    c = sol.config if config is None else config
    if sol.X0 == 0 or sol.Y0 == 0:
        raise ValueError("critical times need both X0 and Y0 nonzero")
    tau_plus = (sol.Y0 / c.epsilon + sol.Y1_0) / (c.nu0 * sol.K)
    tau_minus = (sol.X0 / c.epsilon + sol.X1_0) / (c.nu0 * (sol.K + 4.0 * sol.X0))
    return tau_plus, tau_minus


def selection_ratio(sol: AsymptoticSolution, tau):
    """X_bar / Y_bar with the common exponential removed."""
    c, tau = sol.config, np.asarray(tau, dtype=float)
    num = sol.X0 + c.epsilon * (sol.X1_0 + c.epsilon0 * c.nu0 * (sol.K + 4.0 * sol.X0) * tau)
    den = sol.Y0 + c.epsilon * (sol.Y1_0 - c.epsilon0 * c.nu0 * sol.K * tau)
    if np.any(den == 0):
        raise ZeroDivisionError("Y_bar vanishes at the requested time")
    out = num / den
    return float(out) if out.ndim == 0 else out


def physical_horizon(sol: AsymptoticSolution) -> float:
    """Time beyond which the expansion predicts a negative magnitude."""
    tp, tm = critical_times(sol)
    return tp if sol.config.epsilon0 == 1 else tm


def physical_magnitudes(sol: AsymptoticSolution, tau) -> tuple[np.ndarray, np.ndarray]:
    """(X_bar, Y_bar) restricted to times before the expansion turns negative."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau > physical_horizon(sol)) or np.any(tau < 0):
        raise ValueError("tau outside [0, horizon]: the expansion is not a valid magnitude there")
    return sol.X_bar(tau), sol.Y_bar(tau)


def consistent_initial_data(sol: AsymptoticSolution) -> np.ndarray:
    """Scaled amplitudes on the slow manifold to first order in eps."""
    e = sol.config.epsilon
    return np.array([sol.O10 + e * sol.O11_0, sol.O30 + e * sol.O31_0,
                     e * sol.omega51, e * sol.omega71])


def _tau_dt(config: PerturbationConfig, sol: AsymptoticSolution) -> float:
    # Resolve the fast relaxation rate S/(5 nu0 eps) with margin for RK4 stability.
    fast = (sol.S0 / 5.0 + 2.0 * config.nu0 * config.epsilon) / (config.nu0 * config.epsilon)
    return min(0.01, 0.5 / fast)


@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    x_error: float
    y_error: float


def convergence_study(epsilons, O10: complex, O30: complex, tau_window=(0.0, 1.0),
                      epsilon0: int = 1, nu0: float = 1.0, alpha: float = 1.0,
                      order: int | None = 1, dt: float | None = None) -> list[ConvergenceRow]:
    """Max errors of X_bar and Y_bar against integration of the scaled field.

    Each run starts from consistent initial data with zero order-1 corrections.
    """
    rows = []
    for eps in epsilons:
        cfg = PerturbationConfig(eps, epsilon0, nu0, alpha)
        sol = asymptotic_solution(cfg, O10, O30)
        lo, hi = tau_window
        if not 0 <= lo < hi < 0.5 * min(critical_times(sol)):
            raise ValueError("tau window must lie inside (0, min(tau_plus, tau_minus)/2)")
        step = _tau_dt(cfg, sol) if dt is None else dt
        traj = integrate(lambda t, W: scaled_field(W, cfg, order), consistent_initial_data(sol),
                         TimeGrid(0.0, hi, dt=step))
        tau = traj.times
        keep = tau >= lo
        X = np.abs(traj.states[:, 0]) ** 2
        Y = np.abs(traj.states[:, 1]) ** 2
        rows.append(ConvergenceRow(eps, float(np.max(np.abs(X - sol.X_bar(tau))[keep])),
                                   float(np.max(np.abs(Y - sol.Y_bar(tau))[keep]))))
    return rows


def fast_layer_rate(config: PerturbationConfig, Omega0, s_end: float = 3.0) -> tuple[float, float]:
    """(measured, predicted) decay rate of Omega5 in the fast time s = tau/eps.

    The measured rate fits log |Omega5 - eps Omega51| over s in [0, s_end],
    which removes the slow-manifold offset; the prediction is S/(5 nu0).
    """
    Omega0 = np.asarray(Omega0, dtype=complex)
    eps = config.epsilon
    sol = asymptotic_solution(config, Omega0[0], Omega0[1])
    fast = sol.S0 / (5.0 * config.nu0)
    traj = integrate(lambda t, W: scaled_field(W, config, 1), Omega0,
                     TimeGrid(0.0, s_end * eps, dt=min(0.01, 0.05 / fast) * eps))
    s = traj.times / eps
    dev = np.abs(traj.states[:, 2] - eps * sol.omega51)
    slope = np.polyfit(s, np.log(dev), 1)[0]
    return float(-slope), fast


def expansion_magnitudes(sol: AsymptoticSolution, tau) -> tuple[np.ndarray, np.ndarray]:
    """|Omega10 + eps Omega11|^2 and |Omega30 + eps Omega31|^2 truncated at order eps."""
    e = sol.config.epsilon
    o10, o30 = sol.omega10(tau), sol.omega30(tau)
    o11, o31 = sol.omega11(tau), sol.omega31(tau)
    X = np.abs(o10) ** 2 + e * 2.0 * np.real(np.conj(o10) * o11)
    Y = np.abs(o30) ** 2 + e * 2.0 * np.real(np.conj(o30) * o31)
    return X, Y

