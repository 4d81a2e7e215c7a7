"""Stable manifolds of the line of dipole equilibria (r, 0, ..., 0).

Each equilibrium R = r of the observable system carries a seven-dimensional
stable manifold, written to quadratic order as a graph R = f(A, w, z, P, Q; r).
The construction shifts the equilibrium to the origin, diagonalizes the
linear part with an explicit eigenvector matrix S, solves for a quadratic
graph y1 = h(y2, ..., y8) in the eigen-coordinates, and maps back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.stats import qmc

from .integrator import TimeGrid, integrate
from .observables import observable_field

R_ONE_BAND = 1e-6
R_ZERO_BAND = 1e-6
LAMBDA_FLOOR = 1e-12

GRAPH_COORDS = ("A", "w", "z", "P_re", "P_im", "Q_re", "Q_im")
# Monomials of the graph f, as index tuples into GRAPH_COORDS.
_IDX = {name: i for i, name in enumerate(GRAPH_COORDS)}


def _mono(*names: str) -> tuple[int, ...]:
    return tuple(sorted(_IDX[n] for n in names))


def printed_coefficients(r: float, nu: float) -> dict[tuple[int, ...], float]:
    """Coefficients of f(.; r) - r keyed by monomial (linear and quadratic)."""
    if abs(r) < R_ZERO_BAND:
        raise ValueError("r too close to 0: the graph has 1/r coefficients")
    q = (r * r - 1.0) / (16.0 * nu**2)
    p = (r + 1.0) / (2.0 * nu)
    m = _mono
    return {
        m("w"): q,
        m("z"): q,
        m("P_re"): -p,
        m("Q_re"): p,
        m("A", "w"): -(r * r - 1.0) / (160.0 * nu**4),
        m("A", "z"): -(r * r - 1.0) / (160.0 * nu**4),
        m("A", "P_re"): (r + 1.0) / (40.0 * nu**3),
        m("A", "Q_re"): -(r + 1.0) / (40.0 * nu**3),
        m("w", "z"): (r * r - 1.0) * (7.0 * r * r + 2.0 * r + 1.0) / (768.0 * nu**4 * r),
        m("w", "P_re"): -(r + 1.0) * (4.0 * r * r - r + 1.0) / (96.0 * nu**3 * r),
        m("w", "Q_re"): (r + 1.0) * (3.0 * r + 1.0) / (96.0 * nu**3),
        m("w", "w"): (r * r - 1.0) * (3.0 * r + 2.0) / (768.0 * nu**4),
        m("z", "P_re"): -(r + 1.0) * (3.0 * r + 1.0) / (96.0 * nu**3),
        m("z", "Q_re"): (r + 1.0) * (4.0 * r * r - r + 1.0) / (96.0 * nu**3 * r),
        m("z", "z"): (r * r - 1.0) * (3.0 * r + 2.0) / (768.0 * nu**4),
        m("P_re", "Q_re"): -(r * r - 1.0) / (8.0 * nu**2 * r),
        m("P_im", "Q_im"): -((r + 1.0) ** 2) / (8.0 * nu**2 * r),
    }


def _poly_eval(coefs: dict[tuple[int, ...], float], x: np.ndarray) -> np.ndarray:
    total = np.zeros(x.shape[:-1])
    for mono, c in coefs.items():
        term = c
        for i in mono:
            term = term * x[..., i]
        total = total + term
    return total


def _poly_grad(coefs: dict[tuple[int, ...], float], x: np.ndarray) -> np.ndarray:
    grad = np.zeros(x.shape)
    for mono, c in coefs.items():
        if len(mono) == 1:
            grad[..., mono[0]] += c
        elif mono[0] == mono[1]:
            grad[..., mono[0]] += 2.0 * c * x[..., mono[0]]
        else:
            grad[..., mono[0]] += c * x[..., mono[1]]
            grad[..., mono[1]] += c * x[..., mono[0]]
    return grad


def manifold_eval(r: float, point, nu: float):
    """Graph value R = f(point; r) for point = (A, w, z, P_re, P_im, Q_re, Q_im).

    Accepts a single 7-vector or an array of shape (..., 7).
    """
    x = np.asarray(point, dtype=float)
    if x.shape[-1] != 7:
        raise ValueError("point must have 7 components (A, w, z, P_re, P_im, Q_re, Q_im)")
    val = r + _poly_eval(printed_coefficients(r, nu), x)
    return float(val) if val.ndim == 0 else val


def manifold_gradient(r: float, point, nu: float) -> np.ndarray:
    return _poly_grad(printed_coefficients(r, nu), np.asarray(point, dtype=float))


def shifted_field(x: np.ndarray, r: float, nu: float) -> np.ndarray:
    """Observable field with the equilibrium (r, 0, ..., 0) moved to the origin."""
    x = np.array(x, dtype=float)
    x[..., 0] += r
    return observable_field(x, nu)


def linearization(r: float, nu: float) -> np.ndarray:
    """Jacobian of the observable field at (r, 0, ..., 0)."""
    J = np.zeros((8, 8))
    J[0, 4], J[0, 6] = 1.0 + r, -(1.0 + r)
    J[1, 1] = -2.0 * nu
    J[2, 2] = J[3, 3] = -4.0 * nu
    for i in (4, 5, 6, 7):
        J[i, i] = -2.0 * nu
    J[4, 3] = 0.5 * (1.0 - r)
    J[6, 2] = 0.5 * (r - 1.0)
    return J


@dataclass(frozen=True)
class StableManifoldChart:
    """Eigen-coordinates and quadratic graph coefficients at one equilibrium."""

    r: float
    nu: float

    def __post_init__(self):
        if abs(self.r - 1.0) < R_ONE_BAND:
            raise ValueError("eigenvector matrix is singular at r = 1; use manifold_eval directly")
        if abs(self.r) < R_ZERO_BAND:
            raise ValueError("r too close to 0")
        if not self.nu > 0:
            raise ValueError("nu must be positive")

    @cached_property
    def S(self) -> np.ndarray:
        a = (self.r + 1.0) / (4.0 * self.nu)
        b = 4.0 * self.nu / (self.r - 1.0)
        S = np.eye(8)
        S[0, 2:8] = (a, -a, -2.0 * a, 0.0, 2.0 * a, 0.0)
        S[2, 2] = -b
        S[3, 3] = b
        S[4, 3] = 1.0
        S[6, 2] = 1.0
        return S

    @cached_property
    def S_inv(self) -> np.ndarray:
        a = (self.r + 1.0) / (4.0 * self.nu)
        c = (self.r - 1.0) / (4.0 * self.nu)
        q = (self.r**2 - 1.0) / (16.0 * self.nu**2)
        Si = np.eye(8)
        Si[0, 2:8] = (-q, -q, 2.0 * a, 0.0, -2.0 * a, 0.0)
        Si[2, 2] = -c
        Si[3, 3] = c
        Si[4, 3] = -c
        Si[6, 2] = c
        return Si

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        n = self.nu
        return np.array([0.0, -2 * n, -4 * n, -4 * n, -2 * n, -2 * n, -2 * n, -2 * n])

    @cached_property
    def diagonal_coefficients(self) -> dict[tuple[int, int], float]:
        """Coefficients c_ij of y1 = sum c_ij y_i y_j (1-based eigen-coordinate indices)."""
        r, nu = self.r, self.nu
        k = (r + 1.0) / (r - 1.0)
        return {
            (2, 5): (r + 1.0) / (40.0 * nu**3),
            (2, 7): -(r + 1.0) / (40.0 * nu**3),
            (3, 3): -r * (r + 1.0) / (16.0 * nu**2 * (r - 1.0)),
            (3, 4): (r + 1.0) / (16.0 * nu**2) * (k + 1.0 / r),
            (3, 5): -(r + 1.0) / (12.0 * nu**2) * (0.5 - k - 1.0 / r),
            (3, 7): -(r + 1.0) / (12.0 * nu**2) * (0.5 + k),
            (4, 4): -r * (r + 1.0) / (16.0 * nu**2 * (r - 1.0)),
            (4, 5): -(r + 1.0) / (12.0 * nu**2) * (0.5 + k),
            (4, 7): -(r + 1.0) / (12.0 * nu**2) * (0.5 - k - 1.0 / r),
            (5, 7): -(r * r - 1.0) / (8.0 * nu**2 * r),
            (6, 8): -((r + 1.0) ** 2) / (8.0 * nu**2 * r),
        }

    def to_eigen(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.S_inv.T

    def from_eigen(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) @ self.S.T

    def graph_h(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return sum(c * y[..., i - 1] * y[..., j - 1] for (i, j), c in self.diagonal_coefficients.items())

    def pushed_coefficients(self) -> dict[tuple[int, ...], float]:
        """Coefficients of f - r obtained by carrying h back through S.

        With y = S^-1 (0, A, w, z, P, Q), the graph is R - r = h(y) + S[0, 2:] y[2:].
        Rows 2..8 of S^-1 do not involve R, so each y_i is linear in the seven
        graph coordinates and h(y) expands into a quadratic form in them.
        """
        L = self.S_inv[:, 1:]  # y_i as a linear form in (A, w, z, P_re, P_im, Q_re, Q_im)
        out: dict[tuple[int, ...], float] = {}

        def add(key, val):
            if val != 0.0:
                out[key] = out.get(key, 0.0) + val

        lin = self.S[0, 1:] @ L[1:]
        for i, v in enumerate(lin):
            add((i,), float(v))
        for (i, j), c in self.diagonal_coefficients.items():
            li, lj = L[i - 1], L[j - 1]
            for a in range(7):
                for b in range(7):
                    add(tuple(sorted((a, b))), c * li[a] * lj[b])
        return {k: v for k, v in out.items() if abs(v) > 0.0}

    def lam(self, y: np.ndarray) -> np.ndarray:
        """The shorthand lambda: the shifted R-coordinate expressed in y."""
        return np.asarray(y, dtype=float) @ self.S[0]


def shifted_rhs(y, r: float, nu: float, floor: float = LAMBDA_FLOOR) -> np.ndarray:
    """Observable field in the eigen-coordinates y = S^-1 (x - (r, 0, ..., 0))."""
    if abs(r - 1.0) < R_ONE_BAND:
        raise ValueError("eigen-coordinates are undefined at r = 1")
    y = np.asarray(y, dtype=float)
    y1, y2, y3, y4, y5, y6, y7, y8 = np.moveaxis(y, -1, 0)
    k = r + 1.0
    lam = y1 + k / (4 * nu) * y3 - k / (4 * nu) * y4 - k / (2 * nu) * y5 + k / (2 * nu) * y7
    if np.any(np.abs(lam + r) < floor):
        raise ValueError("lambda + r is within the floor of zero")
    inv = 1.0 / (lam + r)
    s45, s37 = y4 + y5, y3 + y7
    d = s45 - s37
    out = np.empty_like(y)
    out[..., 0] = (lam * d + k / (r - 1) * (y3 - y4) * lam + k / (10 * nu**2) * y2 * (y7 - y5)
                   + k / (2 * nu) * d**2 + k / (2 * nu) * s45 * s37 * (1 - inv)
                   + k / (2 * nu) * y6 * y8 * (1 + inv))
    out[..., 1] = -2 * nu * y2 + 3 / (5 * (r - 1)) * y2 * (y4 - y3)
    out[..., 2] = -4 * nu * y3 - 2 / (5 * nu) * y2 * y3
    out[..., 3] = -4 * nu * y4 - 2 / (5 * nu) * y2 * y4
    out[..., 4] = (-2 * nu * y5 + 2 / (5 * nu) * y2 * y4 - 2 * nu / (r - 1) * lam * y4
                   - 1 / (5 * nu) * y2 * s45 + d * s45
                   + 0.5 * s45 * s37 * (1 - inv) + 0.5 * y6 * y8 * (1 + inv))
    out[..., 5] = (-2 * nu * y6 - 1 / (5 * nu) * y2 * y6 + y6 * d
                   + 0.5 * y6 * s37 * (1 - inv) - 0.5 * y8 * s45 * (1 + inv))
    out[..., 6] = (-2 * nu * y7 + 2 / (5 * nu) * y2 * y3 - 2 * nu / (r - 1) * lam * y3
                   - 1 / (5 * nu) * y2 * s37 + d * s37
                   + 0.5 * s45 * s37 * (inv - 1) - 0.5 * y6 * y8 * (1 + inv))
    out[..., 7] = (-2 * nu * y8 - 1 / (5 * nu) * y2 * y8 + y8 * d
                   + 0.5 * y6 * s37 * (1 + inv) + 0.5 * y8 * s45 * (inv - 1))
    return out


def conjugated_rhs(y, chart: StableManifoldChart) -> np.ndarray:
    """S^-1 F(S y): the shifted field carried into eigen-coordinates by matrix algebra."""
    x = chart.from_eigen(y)
    return shifted_field(x, chart.r, chart.nu) @ chart.S_inv.T


def lift_to_graph(r: float, nu: float, point) -> np.ndarray:
    """Full observable vector (f(point), point) on the graph over ``point``."""
    point = np.asarray(point, dtype=float)
    R = np.asarray(manifold_eval(r, point, nu))
    return np.concatenate([R[..., None], point], axis=-1)


def manifold_residual(r: float, nu: float, direction, scale: float) -> float:
    """|d/dt (R - f)| at the graph point over scale * direction, along the observable field."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0:
        return 0.0
    point = scale * np.asarray(direction, dtype=float)
    x = lift_to_graph(r, nu, point)
    F = observable_field(x, nu)
    return float(abs(F[0] - manifold_gradient(r, point, nu) @ F[1:]))


def residual_directions(n: int = 32, seed: int = 7) -> np.ndarray:
    """Seeded scrambled-Sobol unit directions over the seven graph coordinates.

    A, w and z are squared moduli, so those components are taken nonnegative.
    """
    sampler = qmc.Sobol(d=7, scramble=True, seed=seed)
    m = max(1, math.ceil(math.log2(n)))
    pts = 2.0 * sampler.random_base2(m)[:n] - 1.0
    pts[:, :3] = np.abs(pts[:, :3])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def residual_slope(r: float, nu: float, direction, scales) -> float:
    """Log-log slope of manifold_residual against scale."""
    scales = np.asarray(scales, dtype=float)
    res = np.array([manifold_residual(r, nu, direction, s) for s in scales])
    if np.any(res <= 0):
        return math.inf
    return float(np.polyfit(np.log(scales), np.log(res), 1)[0])


@dataclass(frozen=True)
class AttractionResult:
    r_limit: np.ndarray
    stable_max: np.ndarray
    t_end: float


def attraction(r: float, nu: float, directions, scale: float,
               t_end: float | None = None, dt: float | None = None) -> AttractionResult:
    """Integrate the observable field from graph points and report the limits.

    All directions run as one batch. ``r_limit`` holds the final R values and
    ``stable_max`` the largest final |A|, |w|, ..., |Q_im| per run.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    t_end = 20.0 / nu if t_end is None else t_end
    dt = min(0.05, 0.5 * nu) if dt is None else dt
    x0 = lift_to_graph(r, nu, scale * directions)
    traj = integrate(lambda t, x: observable_field(x, nu), x0,
                     TimeGrid(0.0, t_end, dt=dt, sample_stride=10**9))
    final = traj.final
    return AttractionResult(final[:, 0], np.max(np.abs(final[:, 1:]), axis=1), t_end)
