import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from atomlens.potentials import (FocusConfig, PotentialStack, focusing_potential, free_fall_speed,
                                 gravity_potential, intensity, lens_curvature, optimal_power, peak_intensity,
                                 saturation_factor, trap_potential)
from atomlens.params import SpeciesParams, TrapParams

SP = SpeciesParams()
DELTA = 2 * math.pi * 200e9
LAM_F = 312e-6
K_F = 2 * math.pi / LAM_F


def power(v, xi=5.37):
    return optimal_power(0.5 * SP.mass * v**2, DELTA, SP.gamma, SP.saturation_intensity, K_F, xi, SP.hbar)


def test_trap_potential():
    tr = TrapParams()
    assert trap_potential(0.0, 0.0, 0.0, tr, SP) == 0.0
    expected = 0.5 * 1.40999e-25 * (2 * math.pi * 70) ** 2 * 1e-12
    assert trap_potential(1e-6, 0.0, 0.0, tr, SP) == pytest.approx(expected, rel=1e-14)
    assert trap_potential(1e-6, 0, 0, tr, SP) == trap_potential(0, 0, 1e-6, tr, SP)
    assert trap_potential(0, 0, 151e-6, tr, SP, (0, 0, 150e-6)) == pytest.approx(expected, rel=1e-6)


def test_gravity_potential_and_fall_speed():
    assert gravity_potential(0.0, SP) == 0.0
    z = np.array([1e-6, 2e-6, 3e-6])
    g = gravity_potential(z, SP)
    assert np.allclose(np.diff(g), g[0], rtol=1e-12)
    assert free_fall_speed(1.18e-2, 3e-4, 9.8) == pytest.approx(7.76e-2, rel=5e-3)


def test_intensity():
    assert intensity(0.0, 3e-6, 1.0, 25e-6, LAM_F) == 0.0
    I0 = intensity(10e-6, 0.0, 5.0, 25e-6, LAM_F)
    assert intensity(10e-6, 25e-6, 5.0, 25e-6, LAM_F) / I0 == pytest.approx(math.exp(-2))
    assert intensity(10e-6, -25e-6, 5.0, 25e-6, LAM_F) / I0 == pytest.approx(math.exp(-2))
    assert intensity(LAM_F / 4, 0.0, 7.0, 25e-6, LAM_F) == pytest.approx(7.0 * (math.pi / 2) ** 2)


def test_focusing_potential_zero_and_weak_limit():
    cfg = FocusConfig(power=1e-3, center_z=0.0)
    assert focusing_potential(0.0, 0.0, cfg, SP, 1e6) == 0.0
    I0 = 1e-3
    u = focusing_potential(1e-6, 0.0, cfg, SP, I0)
    weak = 0.5 * SP.hbar * DELTA * saturation_factor(DELTA, SP.gamma) * intensity(1e-6, 0.0, I0, 25e-6, LAM_F) / 16.7
    assert u == pytest.approx(weak, rel=1e-9)


def test_focusing_potential_lens_point_matches_high_precision():
    mp.mp.dps = 40
    I0 = mp.mpf("9.91e6")
    x = mp.mpf("10e-6")
    k = 2 * mp.pi / mp.mpf("312e-6")
    D = 2 * mp.pi * mp.mpf("200e9")
    g = mp.mpf("38e6")
    s = g**2 / (g**2 + 4 * D**2)
    expected = mp.mpf("1.054571817e-34") * D / 2 * mp.log(1 + s * I0 * (k * x) ** 2 / mp.mpf("16.7"))
    cfg = FocusConfig(power=1e-3, center_z=-150e-6)
    got = focusing_potential(10e-6, -150e-6, cfg, SP, 9.91e6)
    assert got == pytest.approx(float(expected), rel=1e-12)


def test_focusing_potential_symmetry_and_monotonicity():
    cfg = FocusConfig(power=1e-3, center_z=-150e-6)
    x = np.linspace(-5e-6, 5e-6, 11)
    u = focusing_potential(x, -140e-6, cfg, SP, 1e7)
    assert np.allclose(u, u[::-1], rtol=1e-14)
    assert focusing_potential(2e-6, -160e-6, cfg, SP, 1e7) == pytest.approx(
        focusing_potential(2e-6, -140e-6, cfg, SP, 1e7), rel=1e-12)
    h = 1e-12
    assert (focusing_potential(h, -150e-6, cfg, SP, 1e7) - focusing_potential(-h, -150e-6, cfg, SP, 1e7)) == 0.0
    I = np.array([1e5, 1e7, 1e9, 1e11, 1e13])
    vals = focusing_potential(1e-6, -150e-6, cfg, SP, I)
    assert np.all(np.diff(vals) > 0)
    # log form is sublinear at large intensity
    assert vals[-1] / vals[-2] < I[-1] / I[-2]


def test_optimal_power_reference_values():
    assert power(0.0, xi=0.0) == 0.0
    v_f = free_fall_speed(1.2049e-2, 3e-4, 9.8)
    assert power(v_f) == pytest.approx(2.433e-3, rel=0.01)
    v_f12 = free_fall_speed(6 * 1.2049e-2, 3e-4, 9.8)
    assert power(v_f12) == pytest.approx(4.48e-3, rel=0.02)


@given(st.floats(0.1, 20), st.floats(1e-30, 1e-26))
def test_optimal_power_linear(xi, E0):
    p1 = optimal_power(E0, DELTA, SP.gamma, 16.7, K_F, xi)
    assert optimal_power(2 * E0, DELTA, SP.gamma, 16.7, K_F, xi) == pytest.approx(2 * p1, rel=1e-12)
    assert optimal_power(E0, DELTA, SP.gamma, 16.7, K_F, 3 * xi) == pytest.approx(3 * p1, rel=1e-12)


def test_optimal_power_rejects_zero_detuning():
    with pytest.raises(ValueError):
        optimal_power(1e-27, 0.0, SP.gamma, 16.7, K_F, 5.37)


def test_peak_intensity():
    assert peak_intensity(2.433e-3, 25e-6) == pytest.approx(9.91e6, rel=0.01)
    assert peak_intensity(2.433e-3, 50e-6) == pytest.approx(2.47e6, rel=0.01)
    assert peak_intensity(0.0, 25e-6) == 0.0
    with pytest.raises(ValueError):
        peak_intensity(1.0, 0.0)


def test_focus_config_validation():
    with pytest.raises(ValueError):
        FocusConfig()
    with pytest.raises(ValueError):
        FocusConfig(power=1e-3, xi=5.0)
    with pytest.raises(ValueError):
        FocusConfig(power=1e-3, sigma_z=0.0)
    cfg = FocusConfig(xi=5.37)
    assert cfg.slit == pytest.approx(156e-6)
    with pytest.raises(ValueError):
        cfg.resolved_power(SP)


def test_lens_curvature_matches_second_derivative():
    cfg = FocusConfig(power=1e-3, center_z=0.0)
    I0 = 1e3
    kappa = lens_curvature(cfg, SP, I0)
    h = 1e-7
    second = (focusing_potential(h, 0.0, cfg, SP, I0) - 2 * 0 + focusing_potential(-h, 0.0, cfg, SP, I0)) / h**2
    assert second == pytest.approx(kappa, rel=1e-6)


def test_potential_stack_routes_terms():
    st_ = PotentialStack()
    st_.add("trap", lambda x, z: 1.0 + 0 * x * z)
    st_.add("gravity", lambda x, z: 2.0 + 0 * x * z)
    st_.add("focusing", lambda x, z: 4.0 + 0 * x * z, z_window=(0.0, 1.0))
    st_.add("absorber", lambda x, z: 8.0 + 0 * x * z)
    mesh = [np.zeros((2, 1)), np.array([[-1.0, 0.5]])]
    assert np.all(st_.evaluate("bec", mesh, (2, 2)) == 1.0)
    assert np.array_equal(st_.evaluate("beam", mesh, (2, 2)), np.array([[2.0, 6.0], [2.0, 6.0]]))
    assert np.all(st_.absorber(mesh, (2, 2)) == 8.0)
    st_.terms[0].enabled = False
    assert np.all(st_.evaluate("bec", mesh, (2, 2)) == 0.0)
    with pytest.raises(ValueError):
        st_.add("magnet", lambda x, z: 0)
