import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pvlab.exceptions import CflViolated, StabilityViolated
from pvlab.geometry import SlabGrid, TorusGrid, d2
from pvlab.interface import (SurfaceCurrent, boundary_operator, coupled_cfl, coupled_step,
                             front_normal_velocity, stability_margin)
from pvlab.plasma import IQ, pack
from pvlab.scenarios import equilibrium_state, make_config
from pvlab.vacuum_elliptic import nu_cross

TOR = TorusGrid(8, 8)


def tangent_state(n1=5, q=0.5, v=(0.0, 0.0, 0.0), H=(0.0, 1.0, 0.0)):
    shape = (n1, 8, 8)
    one = np.ones(shape)
    return pack(q * one, np.asarray(v)[:, None, None, None] * one,
                np.asarray(H)[:, None, None, None] * one, 0 * one)


def const_vacuum(Hc, n1=5):
    return np.asarray(Hc, dtype=float)[:, None, None, None] * np.ones((3, n1, 8, 8))


def test_equilibrium_residuals_vanish():
    U = tangent_state()
    Hc = const_vacuum((0, 0, 1))
    J = nu_cross(Hc[:, 0])
    res = boundary_operator(U, Hc, np.zeros((8, 8)), np.zeros((8, 8)), J)
    for r in res:
        assert np.all(r == 0.0)


def test_normal_velocity_enters_first_residual():
    a = 0.37
    U = tangent_state(v=(a, 0, 0))
    Hc = const_vacuum((0, 0, 1))
    r1 = boundary_operator(U, Hc, np.zeros((8, 8)), np.zeros((8, 8)), nu_cross(Hc[:, 0]))[0]
    assert np.allclose(r1, -a, rtol=0, atol=1e-15)


def test_tangent_velocity_on_tilted_front():
    X2, _ = TOR.mesh()
    phi = 0.02 * np.cos(2 * np.pi * X2)
    U = tangent_state()
    U[2] = 0.3
    U[1] = 0.3 * d2(phi)
    assert np.max(np.abs(front_normal_velocity(U, phi))) < 1e-15
    dphi = 0.01 * np.sin(2 * np.pi * X2)
    r1 = boundary_operator(U, const_vacuum((0, 0, 1)), phi, dphi, np.zeros((3, 8, 8)))[0]
    assert np.max(np.abs(r1 - dphi)) < 1e-15


@pytest.mark.parametrize("Hc,want", [((0, 0, 1), 1.0), ((0, 1, 0), 0.0)])
def test_margin_reference_values(Hc, want):
    mn, f = stability_margin(tangent_state(), const_vacuum(Hc))
    assert mn == want
    assert np.all(f == want)


@given(alpha=st.floats(-np.pi, np.pi))
def test_margin_is_abs_sin_of_angle(alpha):
    mn, _ = stability_margin(tangent_state(), const_vacuum((0, np.cos(alpha), np.sin(alpha))))
    assert abs(mn - abs(np.sin(alpha))) <= 1e-15


@given(a=st.floats(0.1, 4.0), b=st.floats(0.1, 4.0), seed=st.integers(0, 2 ** 16))
def test_margin_is_bilinear(a, b, seed):
    r = np.random.default_rng(seed)
    H = r.standard_normal(3)
    Hc = r.standard_normal(3)
    base = stability_margin(tangent_state(H=H), const_vacuum(Hc))[1]
    scaled = stability_margin(tangent_state(H=a * H), const_vacuum(b * Hc))[1]
    assert np.max(np.abs(scaled - a * b * base)) <= 1e-13 * (1 + np.max(base)) * a * b
    assert np.array_equal(stability_margin(tangent_state(H=2 * H), const_vacuum(Hc))[1], 2 * base)


def test_strict_margin_raises():
    with pytest.raises(StabilityViolated):
        stability_margin(tangent_state(), const_vacuum((0, 1, 0)), strict_delta0=0.5)


def test_surface_current_interpolation_and_validation(tmp_path):
    v = np.zeros((2, 3, 8, 8))
    v[1, 1] = 2.0
    J = SurfaceCurrent(v, np.array([0.0, 1.0]))
    assert np.all(J(0.25)[1] == 0.5)
    assert np.all(J.derivative(0.5, 1)[1] == 2.0)
    assert np.all(J(5.0)[1] == 2.0)
    bad = v.copy()
    bad[0, 0] = 1.0
    with pytest.raises(ValueError):
        SurfaceCurrent(bad, np.array([0.0, 1.0]))
    np.savez(tmp_path / "j.npz", values=v, times=np.array([0.0, 1.0]))
    assert np.array_equal(SurfaceCurrent.from_file(str(tmp_path / "j.npz")).values, v)
    with pytest.raises(FileNotFoundError):
        SurfaceCurrent.from_file(str(tmp_path / "missing.npz"))


def test_equilibrium_run_is_stationary():
    cfg = make_config(SlabGrid(9, 9), TOR)
    s0 = equilibrium_state(cfg)
    s = s0
    dt = 0.5 * coupled_cfl(s, cfg)
    for _ in range(100):
        s, d = coupled_step(s, dt, cfg)
        assert abs(d["margin_min"] - 1.0) <= 1e-8
        # pressure jump vanishes identically after the trace update
        q_jump = s.U[IQ, 0] - 0.5 * np.sum(s.Hcal[:, -1] ** 2, axis=0)
        assert np.max(np.abs(q_jump)) <= 1e-14
    assert np.max(np.abs(s.U - s0.U)) <= 1e-8
    assert np.max(np.abs(s.Hcal - s0.Hcal)) <= 1e-8


def test_perturbed_front_run_keeps_margin():
    cfg = make_config(SlabGrid(9, 9), TOR)
    s = equilibrium_state(cfg, phi_amp=1e-3)
    dt = 0.5 * coupled_cfl(s, cfg)
    energies = []
    for _ in range(100):
        s, d = coupled_step(s, dt, cfg)
        assert d["margin_min"] >= 0.9
        energies.append(d["energy"])
    assert np.all(np.isfinite(energies))
    assert (max(energies) - min(energies)) / energies[0] < 1e-2


def test_step_above_cfl_is_rejected():
    cfg = make_config(SlabGrid(9, 9), TOR)
    s = equilibrium_state(cfg)
    with pytest.raises(CflViolated):
        coupled_step(s, 2 * coupled_cfl(s, cfg), cfg)
