import math

import numpy as np
import pytest

from qslab import spectral
from qslab.spectral import FourierField


def test_construction_checks():
    n = 5
    c = np.zeros((n, n), dtype=complex)
    c[2, 2] = 1.0
    with pytest.raises(ValueError):
        FourierField(2, c)
    c = np.zeros((n, n), dtype=complex)
    c[3, 2] = 1.0  # (1, 0) without its conjugate partner
    with pytest.raises(ValueError):
        FourierField(2, c)
    with pytest.raises(ValueError):
        FourierField(2, np.zeros((4, 4)))


def test_y_bar_linear():
    f = FourierField.from_modes(4, {(0, 1): 0.3 - 0.2j}, 0.9)
    d = spectral.full_rhs(f, 0.05).coeffs
    assert np.allclose(d, -0.05 * f.coeffs, atol=1e-18, rtol=0)


def test_dipole_linear():
    f = FourierField.from_modes(4, {(1, 0): 0.5j, (0, 1): -0.2}, 1.0)
    d = spectral.full_rhs(f, 0.05).coeffs
    assert np.max(np.abs(d + 0.05 * f.coeffs)) < 1e-17


@pytest.mark.parametrize("delta", [0.9, 1.0, 1.1])
def test_brute_force_oracle(delta):
    f = spectral.random_field(4, delta, 3, 1e-2)
    a = spectral.full_rhs(f, 0.03).coeffs
    b = spectral.brute_force_rhs(f, 0.03)
    assert np.max(np.abs(a - b)) <= 1e-13 * np.max(np.abs(a))


def test_exact_family_examples():
    f = spectral.exact_family(1, (0, 0, 0, 1), 0.95, 0.1, 2.0, K=3)
    v = math.exp(-0.2) / 2
    assert f[(0, 1)] == pytest.approx(-0.5j * 2 * v) and f[(0, -1)] == pytest.approx(0.5j * 2 * v)
    assert abs(f[(0, 1)] + 1j * v) < 1e-16
    g = spectral.exact_family(2, (1, 0, 0, 0), 1.1, 0.1, 1.0)
    assert g[(2, 0)] == pytest.approx(0.5 * math.exp(-0.4 / 1.21))
    with pytest.raises(ValueError):
        spectral.exact_family(1, (1, 0, 1, 0), 0.9, 0.1, 0.0)


@pytest.mark.parametrize("m, a, delta", [(1, (1, 0, 1, 0), 1.0), (1, (0, 1, 0, 0), 0.9),
                                         (2, (0, 0, 1, 1), 1.1)])
def test_exact_family_preserved(m, a, delta):
    nu, K = 0.02, 4
    start = spectral.exact_family(m, a, delta, nu, 0.0, K)
    end = spectral.integrate_field(start, nu, 10.0, 0.05).final
    ref = spectral.exact_family(m, a, delta, nu, 10.0, K).coeffs
    assert np.max(np.abs(end - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_projection():
    f = spectral.exact_family(1, (0, 0, 0, 1), 1.0, 0.1, 0.0, K=2)
    s = spectral.project8(f).as_array()
    assert s[0] == 0 and s[2] == 0 and s[3] == 0 and s[1] != 0
    assert np.all(spectral.project8(FourierField.zeros(3)).as_array() == 0)
    r = spectral.random_field(3, 1.0, 5, 1.0)
    assert spectral.project8(r).omega7 == r.coeffs[4, 2]


def test_euler_single_mode():
    f = FourierField.from_modes(3, {(1, 2): 0.4 + 0.1j})
    assert spectral.euler_conservation_report(f, 1.0, 0.01) == (0.0, 0.0)


def test_euler_dipole():
    f = FourierField.from_modes(3, {(1, 0): 0.4, (0, 1): 0.3j})
    dE, dZ = spectral.euler_conservation_report(f, 1.0, 0.01)
    assert dE < 1e-15 and dZ < 1e-15


def test_euler_drift_step_halving():
    # Single halvings are noisy (the signed drift can nearly cancel), so fit
    # the order over three halvings.
    f = spectral.random_field(4, 1.0, 1, 0.05)
    dts = np.array([0.4, 0.2, 0.1, 0.05])
    drift = [spectral.euler_conservation_report(f, 4.0, dt)[0] for dt in dts]
    order = np.polyfit(np.log(dts), np.log(drift), 1)[0]
    assert 3.3 < order < 5.5


def test_reality_preserved():
    f = spectral.random_field(4, 0.9, 8, 1e-2)
    traj = spectral.integrate_field(f, 0.02, 5.0, 0.05, sample_stride=20)
    scale = np.max(np.abs(traj.states))
    assert all(spectral.reality_defect(c) < 1e-12 * scale for c in traj.states)


def test_random_field_reproducible():
    a = spectral.random_field(4, 1.0, 11, 0.25)
    b = spectral.random_field(4, 1.0, 11, 0.25)
    assert np.array_equal(a.coeffs, b.coeffs) and a.energy() == pytest.approx(0.25)


def test_mirror_symmetry():
    f = spectral.random_field(3, 1.0, 4, 1e-2)
    lhs = spectral.full_rhs(spectral.mirror_field(f), 0.02).coeffs
    rhs = spectral.mirror_field(spectral.full_rhs(f, 0.02)).coeffs
    assert np.max(np.abs(lhs - rhs)) < 1e-16


def test_selection_mirror():
    f = spectral.random_field(4, 1.0, 6, 0.02**2)
    g = spectral.mirror_field(f)
    a = spectral.integrate_field(f, 0.02, 40.0, 0.1, sample_stride=10)
    b = spectral.integrate_field(g, 0.02, 40.0, 0.1, sample_stride=10)
    pa, pb = spectral.projected_states(a, 4), spectral.projected_states(b, 4)
    Ra = np.abs(pa[:, 0]) ** 2 / np.abs(pa[:, 1]) ** 2
    Rb = np.abs(pb[:, 0]) ** 2 / np.abs(pb[:, 1]) ** 2
    assert np.allclose(Ra * Rb, 1.0, rtol=1e-10)


def test_selection_direction_delta09():
    rep = spectral.selection_experiment([3], 0.9, 0.02, 4, 150.0)[0]
    assert rep.spectral_slope < 0 and rep.agrees


def test_selection_flat_symmetric():
    rep = spectral.selection_experiment([3], 1.0, 0.02, 4, 150.0)[0]
    assert abs(rep.spectral_slope) < 2e-3
