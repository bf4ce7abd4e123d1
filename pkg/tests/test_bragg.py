import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from atomlens.bragg import (BraggConfig, bragg_wavenumber, calibrate_outcoupling, coupling_phase,
                            kick_to_order_angle, rabi_for_width, recoil_velocity, resonance_frequency)
from atomlens.params import HBAR, RB85_MASS, SpeciesParams, TrapParams

LAMBDA = 780.027e-9


def test_bragg_wavenumber_counterpropagating():
    assert bragg_wavenumber(LAMBDA, math.pi) == pytest.approx(1.611e7, rel=1e-3)


def test_bragg_wavenumber_copropagating_and_sixty_degrees():
    assert bragg_wavenumber(LAMBDA, 0.0) == 0.0
    # 2 k sin 30 deg = k
    assert bragg_wavenumber(LAMBDA, math.pi / 3) == pytest.approx(2 * math.pi / LAMBDA, rel=1e-12)
    assert bragg_wavenumber(LAMBDA, math.pi / 3) == pytest.approx(8.055e6, rel=1e-3)


def test_resonance_frequency():
    assert resonance_frequency(0, 1.611e7, RB85_MASS) == 0
    w1 = resonance_frequency(1, 1.611e7, RB85_MASS)
    assert w1 == pytest.approx(HBAR * 1.611e7**2 / (2 * RB85_MASS), rel=1e-14)
    assert w1 == pytest.approx(9.70e4, rel=2e-3)
    assert resonance_frequency(2, 1.611e7, RB85_MASS) == 2 * w1


def test_resonance_energy_matches_recoil_kinetic_energy():
    q = bragg_wavenumber(LAMBDA, math.pi)
    w = resonance_frequency(1, q, RB85_MASS)
    # single-order case: hbar w equals (hbar q)^2 / 2m
    assert HBAR * w == pytest.approx((HBAR * q) ** 2 / (2 * RB85_MASS), rel=1e-14)


def test_recoil_velocity():
    v1 = recoil_velocity(1, 1.611e7, RB85_MASS)
    assert v1 == pytest.approx(1.20e-2, rel=5e-3)
    assert v1 == pytest.approx(1.18e-2, rel=0.03)
    assert recoil_velocity(0, 1.611e7, RB85_MASS) == 0
    assert recoil_velocity(6, 1.611e7, RB85_MASS) == pytest.approx(6 * v1, rel=1e-15)


def test_calibrate_outcoupling_reference_point():
    tr, sp = TrapParams(), SpeciesParams()
    assert calibrate_outcoupling(669.0, tr, sp) == pytest.approx(50e-9, rel=0.05)
    assert calibrate_outcoupling(0.0, tr, sp) == 0.0


def test_inverse_at_40nm():
    tr, sp = TrapParams(), SpeciesParams()
    wz = tr.omega_z
    g = sp.g_accel
    expected = sp.mass * wz**2 / sp.hbar * (((40e-9 + 2 * g / wz**2) / 2) ** 2 - g**2 / wz**4)
    got = rabi_for_width(40e-9, tr, sp)
    assert got == pytest.approx(expected, rel=1e-6)
    assert got == pytest.approx(524.0, rel=0.02)


def test_inverse_rejects_negative_width():
    with pytest.raises(ValueError):
        rabi_for_width(-1e-9, TrapParams(), SpeciesParams())


@given(st.floats(0, 1e4))
def test_calibration_round_trip(rabi):
    tr, sp = TrapParams(), SpeciesParams()
    back = rabi_for_width(calibrate_outcoupling(rabi, tr, sp), tr, sp)
    assert back == pytest.approx(rabi, rel=1e-10, abs=1e-12)


@given(st.floats(1e-9, 60e-9))
def test_small_rabi_linearization(width):
    tr, sp = TrapParams(), SpeciesParams()
    rabi = rabi_for_width(width, tr, sp)
    assert width == pytest.approx(sp.hbar * rabi / (sp.mass * sp.g_accel), rel=0.02)


def test_config_resolution_fills_missing_partner():
    tr, sp = TrapParams(), SpeciesParams()
    cfg = BraggConfig(resonance_width=40e-9).resolved(tr, sp)
    assert cfg.rabi == pytest.approx(rabi_for_width(40e-9, tr, sp))
    with pytest.raises(ValueError):
        BraggConfig().resolved(tr, sp)
    with pytest.raises(ValueError):
        BraggConfig(order=0)
    with pytest.raises(ValueError):
        BraggConfig(angle=4.0)


def test_kick_to_order_angle():
    assert kick_to_order_angle(2.0) == (1, pytest.approx(math.pi))
    n, a = kick_to_order_angle(12.0)
    assert n == 6 and a == pytest.approx(math.pi)
    n, a = kick_to_order_angle(0.5)
    assert n == 1 and 2 * math.sin(a / 2) == pytest.approx(0.5)
    n, a = kick_to_order_angle(3.0)
    assert n == 2 and 2 * n * math.sin(a / 2) == pytest.approx(3.0)


def test_coupling_phase_unit_modulus_and_origin():
    cfg, sp = BraggConfig(rabi=500.0), SpeciesParams()
    assert coupling_phase(0.0, 0.0, cfg, sp) == pytest.approx(1.0)
    z = np.random.default_rng(0).uniform(-2e-4, 2e-4, 10**6)
    f = coupling_phase(z, 1.7e-3, cfg, sp)
    assert np.max(np.abs(np.abs(f) - 1)) < 1e-14


def test_coupling_phase_gradient():
    cfg, sp = BraggConfig(rabi=500.0, order=2), SpeciesParams()
    dz = 1e-10
    z = np.arange(0, 1e-8, dz)
    phase = np.unwrap(np.angle(coupling_phase(z, 0.0, cfg, sp)))
    # q points along -z, so the phase falls at rate n q along +z
    assert np.gradient(phase, dz).mean() == pytest.approx(-cfg.order * cfg.q, rel=1e-6)
