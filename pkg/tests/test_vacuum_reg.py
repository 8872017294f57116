import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pvlab.exceptions import CflViolated, HyperbolicityViolated
from pvlab.geometry import SlabGrid, TorusGrid, flat_metric, front_metric
from pvlab.scenarios import perturbed_plasma
from pvlab.vacuum_reg import (RegBC, RegState, assemble_secondary, check_hyperbolicity, cutoff,
                              frak_B, reg_cfl, reg_energy, step_regularized)

SLAB, TOR = SlabGrid(17, 17), TorusGrid(8, 8)
X2, X3 = TOR.mesh()


def test_zero_nu_gives_identity_and_printed_B1():
    eps = 0.2
    nu = np.zeros((3, 2, 2, 2))
    B0, B1, _, _ = frak_B(nu, eps)
    assert np.array_equal(B0, np.eye(6)[:, :, None, None, None] * np.ones((1, 1, 2, 2, 2)))
    want = np.zeros((6, 6))
    want[2, 4] = want[4, 2] = 1 / eps
    want[1, 5] = want[5, 1] = -1 / eps
    assert np.array_equal(B1[..., 0, 0, 0], want)


@given(seed=st.integers(0, 2 ** 16), eps=st.floats(0.05, 3.0))
def test_B0_eigenvalues(seed, eps):
    nu = np.random.default_rng(seed).uniform(-1, 1, (3, 4))
    B0 = np.moveaxis(frak_B(nu, eps)[0], -1, 0)
    assert np.max(np.abs(B0 - np.swapaxes(B0, 1, 2))) == 0.0
    n = np.sqrt(np.sum(nu ** 2, axis=0))
    want = np.sort(np.stack([np.ones_like(n)] * 2 + [1 - eps * n] * 2 + [1 + eps * n] * 2, axis=1))
    assert np.max(np.abs(np.linalg.eigvalsh(B0) - want)) <= 1e-12


def test_cutoff_ends():
    assert cutoff(np.array(-1.0)) == 0.0 and cutoff(np.array(0.0)) == 1.0
    assert np.all(np.diff(cutoff(np.linspace(-1, 0, 50))) >= 0)


def _uniform_speed(eps_nu):
    m = flat_metric(SLAB, TOR).vacuum
    v = np.zeros((3, 8, 8))
    v[1], v[2] = 0.6, 0.8
    return assemble_secondary(m, v, np.zeros((8, 8)), eps_nu)


@pytest.mark.parametrize("eps_nu,ok", [(0.5, True), (1.0, False), (1.5, False)])
def test_hyperbolicity_margin(eps_nu, ok):
    rep = check_hyperbolicity(_uniform_speed(eps_nu))
    assert abs(rep.min_eig - (1 - eps_nu)) <= 1e-12
    assert abs(rep.min_margin - (1 - eps_nu)) <= 1e-12
    assert rep.signs_agree
    assert rep.ok() == ok


def test_wall_value_of_B1_is_the_unweighted_matrix():
    sy = _uniform_speed(0.5)
    B1_wall = sy.B[1][..., 0, :, :]
    ref = frak_B(np.zeros((3, 8, 8)), 0.5)[1]
    assert np.array_equal(B1_wall, ref)


@given(seed=st.integers(0, 2 ** 16))
def test_congruence_preserves_symmetry(seed):
    r = np.random.default_rng(seed)
    phi = 0.03 * r.uniform(-1, 1) * np.cos(2 * np.pi * (X2 + r.integers(0, 3) * X3))
    m = front_metric(phi, SLAB, TOR).vacuum
    sy = assemble_secondary(m, r.uniform(-1, 1, (3, 8, 8)), phi, r.uniform(0.05, 0.5))
    for Bm, Mm in zip((sy.B[0], sy.B1tilde, sy.B[2], sy.B[3]), sy.M):
        assert np.max(np.abs(Bm - np.swapaxes(Bm, 0, 1))) <= 1e-12
        assert np.max(np.abs(Mm - np.swapaxes(Mm, 0, 1))) <= 1e-12 * (1 + np.max(np.abs(Mm)))


def test_eps_must_be_positive():
    with pytest.raises(ValueError):
        _uniform_speed(0.0)


def test_zero_fields_stay_zero():
    m = flat_metric(SLAB, TOR).vacuum
    z = np.zeros((3,) + m.d1Phi1.shape)
    s = RegState(z, z.copy(), 0.1)
    s, flux = step_regularized(s, m, TOR, RegBC(np.zeros((2, 8, 8))), 0.5 * reg_cfl(m, TOR, 0.1))
    assert np.all(s.Hfrak == 0) and np.all(s.Efrak == 0)
    assert flux == {"J_plus": 0.0, "J_minus": 0.0}


def test_fluxes_vanish_under_wall_conditions(rng):
    m = front_metric(0.02 * np.cos(2 * np.pi * X2), SLAB, TOR).vacuum
    H, E = rng.standard_normal((2, 3) + m.d1Phi1.shape)
    U = perturbed_plasma(SLAB, TOR, 0.05)
    _, flux = step_regularized(RegState(H, E, 0.1), m, TOR, RegBC(np.zeros((2, 8, 8))), 1e-4,
                               U_plasma=U)
    assert abs(flux["J_plus"]) <= 1e-12 and abs(flux["J_minus"]) <= 1e-12


def test_step_guards():
    m = flat_metric(SLAB, TOR).vacuum
    z = np.zeros((3,) + m.d1Phi1.shape)
    bc = RegBC(np.zeros((2, 8, 8)))
    with pytest.raises(CflViolated):
        step_regularized(RegState(z, z, 0.05), m, TOR, bc, 2 * reg_cfl(m, TOR, 0.05))
    # the cap shrinks in proportion to eps
    assert abs(reg_cfl(m, TOR, 0.05) / reg_cfl(m, TOR, 0.1) - 0.5) < 1e-14
    with pytest.raises(HyperbolicityViolated):
        step_regularized(RegState(z, z, 1.5), m, TOR, bc, 1e-4, symm=_uniform_speed(1.5))


def test_energy_is_conserved_up_to_stencil_error():
    """Closed walls, no damping: the energy drift comes from the x1 edge stencils."""
    drift = []
    for n1 in (17, 33, 65):
        m = flat_metric(SlabGrid(n1, n1), TOR).vacuum
        x = m.x1[:, None, None]
        H = np.stack([0 * x * X2, np.sin(np.pi * x) ** 2 * np.cos(2 * np.pi * X3),
                      (x + 1) * x * np.sin(2 * np.pi * X2)])
        E = np.stack([np.cos(2 * np.pi * X2) * np.sin(np.pi * x) + 0 * X3, 0 * x * X2,
                      x * (x + 1) * np.cos(2 * np.pi * X3)])
        bc = RegBC(np.zeros((2, 8, 8)))
        s = RegState(H, E, 0.1)
        dt = 0.5 * reg_cfl(m, TOR, 0.1)
        n = int(np.ceil(0.05 / dt))
        e0 = reg_energy(s, m)
        for _ in range(n):
            s, _ = step_regularized(s, m, TOR, bc, 0.05 / n)
        drift.append(abs(reg_energy(s, m) - e0) / e0)
    drift = np.array(drift)
    assert drift[0] < 1e-2
    assert np.all(drift[:-1] / drift[1:] > 3.0)
