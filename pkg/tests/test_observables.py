import math

import numpy as np
import pytest

from qslab.integrator import TimeGrid, Trajectory, integrate
from qslab.model import ModelParams, ModeState, reduced_field, reduced_rhs
from qslab.observables import (DegenerateChartError, ObservableState, ab_rhs, diagnostic_series,
                               diagnostics, fit_decay_rate, observable_field, observable_rhs,
                               observable_rhs_complex, ratio_rate, realizability_defect,
                               reduced_pushforward, to_observables)


def generic(rng, scale=1.0):
    return ModeState.from_array(scale * (rng.normal(size=4) + 1j * rng.normal(size=4)))


def test_no_high_modes():
    o = to_observables(ModeState(1.0, 1.0))
    assert (o.R, o.A, o.w, o.z, o.P, o.Q) == (1, 2, 0, 0, 0, 0)


def test_unit_state():
    o = to_observables(ModeState(1.0, 1.0, 1.0, 1.0))
    assert (o.R, o.A, o.w, o.z, o.P, o.Q) == (1, 2, 1, 1, 1, 1)


def test_frozen_image():
    # Quotients evaluated by hand: R = 0.1/0.04, P = (0.3+0.1i)(0.2)(0.01)/0.04, Q = (0.3-0.1i)(0.2)(0.05i)/0.04.
    o = to_observables(ModeState(0.3 + 0.1j, 0.2, 0.05j, 0.01))
    got = o.as_real()
    want = [2.5, 0.14, 0.0025, 1e-4, 0.015, 0.005, 0.025, 0.075]
    assert np.allclose(got, want, rtol=1e-13, atol=0)


def test_degenerate_chart():
    with pytest.raises(DegenerateChartError):
        to_observables(ModeState(1.0, 0.0))
    with pytest.raises(DegenerateChartError):
        observable_field(np.zeros(8), 0.1)


@pytest.mark.parametrize("r", [0.3, 1.0, 4.0])
def test_equilibrium_line(r):
    x = np.zeros(8)
    x[0] = r
    assert np.all(observable_field(x, 0.05) == 0)


def test_only_A():
    d = observable_rhs(ObservableState(2.0, 0.3, 0, 0, 0j, 0j), ModelParams(0.1))
    assert d.A == pytest.approx(-0.06, abs=1e-16) and d.R == 0


def test_complex_form_matches_split():
    rng = np.random.default_rng(2)
    p = ModelParams(0.07)
    for _ in range(10):
        o = to_observables(generic(rng))
        a, b = observable_rhs(o, p).as_real(), observable_rhs_complex(o, p).as_real()
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_symmetric_only():
    o = to_observables(ModeState(1.0, 1.0))
    with pytest.raises(ValueError):
        observable_rhs(o, ModelParams(0.1, 0.9))
    with pytest.raises(ValueError):
        ab_rhs(1.0, 1.0, ModelParams(0.1, 1.1))


def test_ab_cases():
    p = ModelParams(0.01)
    assert ab_rhs(0.0, 0.5, p) == (0.0, -0.02)
    assert ab_rhs(0.5, 0.0, p) == (-0.01, 0.0)
    dA, dB = ab_rhs(0.1, 0.05, p)
    assert dA == pytest.approx(0.073, rel=1e-14)
    assert dB == pytest.approx(-0.202, rel=1e-14)


def test_ab_identity_along_flow():
    rng = np.random.default_rng(8)
    p = ModelParams(0.04)
    for _ in range(20):
        s = generic(rng, 0.1)
        w, dw = s.as_array(), reduced_rhs(s, p).as_array()
        dA = 2 * np.real(np.conj(w[:2]) * dw[:2]).sum()
        dB = 2 * np.real(np.conj(w[2:]) * dw[2:]).sum()
        d = diagnostics(s)
        eA, eB = ab_rhs(d.A, d.B, p)
        assert dA == pytest.approx(eA, rel=1e-12, abs=1e-300)
        assert dB == pytest.approx(eB, rel=1e-12, abs=1e-300)


def test_pushforward_matches():
    rng = np.random.default_rng(9)
    p = ModelParams(0.05)
    for _ in range(10):
        s = generic(rng)
        a = reduced_pushforward(s, p).as_real()
        b = observable_rhs(to_observables(s), p).as_real()
        assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(b))


def test_diagnostics_cases():
    z = diagnostics(ModeState())
    assert (z.A, z.B, z.E, z.R, z.U) == (0, 0, 0, None, None)
    u = diagnostics(ModeState(1, 1, 1, 1))
    assert (u.A, u.B, u.E, u.R, u.U) == (2, 2, 2, 1, 1)


def test_diagnostics_random():
    rng = np.random.default_rng(1)
    s = generic(rng)
    w = s.as_array()
    d = diagnostics(s)
    n = [abs(complex(v)) ** 2 for v in w]
    assert d.A == pytest.approx(n[0] + n[1], rel=1e-15)
    assert d.B == pytest.approx(n[2] + n[3], rel=1e-15)
    assert d.R == pytest.approx(n[0] / n[1], rel=1e-15)
    ser = diagnostic_series(np.stack([w, np.zeros(4)]))
    assert ser["R"][0] == pytest.approx(d.R, rel=1e-15) and math.isnan(ser["R"][1])


def test_fit_exact_exponential():
    t = np.linspace(0, 100, 201)
    traj = Trajectory(t, np.exp(-0.02 * t)[:, None])
    assert abs(fit_decay_rate(traj, lambda s: s[0]) - 0.02) < 1e-10


def test_fit_bar_rate():
    p = ModelParams(0.05)
    traj = integrate(lambda t, w: reduced_field(w, p), np.array([0, 0.1, 0, 0], dtype=complex),
                     TimeGrid(0.0, 40.0, dt=0.01, sample_stride=10))
    rate = fit_decay_rate(traj, lambda s: abs(s[1]))
    assert abs(rate - 0.05) < 1e-6


def test_fit_rejects_bad_window():
    traj = Trajectory(np.linspace(0, 1, 5), np.ones((5, 1)))
    with pytest.raises(ValueError):
        fit_decay_rate(traj, lambda s: s[0], window=(0.5, 2.0))
    with pytest.raises(ValueError):
        fit_decay_rate(traj, lambda s: s[0] - 1.0)


def test_realizability():
    rng = np.random.default_rng(6)
    for _ in range(20):
        assert realizability_defect(to_observables(generic(rng))) < 1e-12


@pytest.mark.parametrize("delta", [0.9, 1.0, 1.1])
def test_ratio_rate_identity(delta):
    rng = np.random.default_rng(12)
    p = ModelParams(0.05, delta)
    for _ in range(5):
        s = generic(rng, 0.2)
        w, dw = s.as_array(), reduced_rhs(s, p).as_array()
        n1, n3 = abs(w[0]) ** 2, abs(w[1]) ** 2
        dn1 = 2 * np.real(np.conj(w[0]) * dw[0])
        dn3 = 2 * np.real(np.conj(w[1]) * dw[1])
        direct = (dn1 * n3 - n1 * dn3) / n3**2
        assert ratio_rate(s, p) == pytest.approx(direct, rel=1e-10)
