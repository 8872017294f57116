"""Reference initial states used by tests, the acceptance suite and the CLI.

Stationary configuration: rho = 1, S = 0 (so p = 1), v = 0, H = (0, 1, 0)
and vacuum field Hcal = (0, sqrt 2, 1).  Pressure balance q = p + |H|^2/2 =
|Hcal|^2/2 = 3/2 holds on the interface and the stability margin
|H2 Hcal3 - H3 Hcal2| equals 1.
"""

from __future__ import annotations

import numpy as np

from .geometry import SlabGrid, TorusGrid, bump, d2
from .interface import CoupledConfig, CoupledState, SurfaceCurrent, initial_vacuum
from .plasma import Eos, pack
from .vacuum_elliptic import nu_cross

HCAL_EQ = np.array([0.0, np.sqrt(2.0), 1.0])
H_EQ = np.array([0.0, 1.0, 0.0])


def equilibrium_current(torus: TorusGrid) -> SurfaceCurrent:
    J = nu_cross(HCAL_EQ[:, None, None] * np.ones((3, torus.n2, torus.n3)))
    return SurfaceCurrent.constant(J)


def equilibrium_plasma(slab: SlabGrid, torus: TorusGrid, p0: float = 1.0) -> np.ndarray:
    shape = (slab.n1p, torus.n2, torus.n3)
    one = np.ones(shape)
    H = H_EQ[:, None, None, None] * one
    q = p0 + 0.5 * np.sum(H ** 2, axis=0)
    return pack(q, np.zeros((3,) + shape), H, np.log(p0) * one)


def interior_bump(x1: np.ndarray) -> np.ndarray:
    """Smooth bump centred at x1 = 1/2 that vanishes on [0, 1/6] and [5/6, 1]."""
    return bump(1.5 * (x1 - 0.5))


def perturbed_plasma(slab: SlabGrid, torus: TorusGrid, delta: float = 0.05) -> np.ndarray:
    """Equilibrium plus an interior perturbation with div h = 0 exactly."""
    X2, X3 = torus.mesh()
    b = interior_bump(slab.x1p)[:, None, None]
    c2, c3 = np.cos(2 * np.pi * X2), np.cos(2 * np.pi * X3)
    p = 1.0 + delta * b * c2
    H = np.stack([0 * b * c2, 1.0 + delta * b * c3, delta * b * c2])
    v = np.stack([delta * b * np.sin(2 * np.pi * X2), delta * b * c3, 0 * b * c2])
    S = 0.5 * delta * b * np.sin(2 * np.pi * X3)
    return pack(p + 0.5 * np.sum(H ** 2, axis=0), v, H, S)


def make_config(slab: SlabGrid, torus: TorusGrid, **kw) -> CoupledConfig:
    return CoupledConfig(slab=slab, torus=torus, jext=equilibrium_current(torus), **kw)


def equilibrium_state(cfg: CoupledConfig, phi_amp: float = 0.0) -> CoupledState:
    X2, _ = cfg.torus.mesh()
    phi = phi_amp * np.cos(2 * np.pi * X2)
    U = equilibrium_plasma(cfg.slab, cfg.torus)
    Hc = HCAL_EQ[:, None, None, None] * np.ones((3, cfg.slab.n1m, cfg.torus.n2, cfg.torus.n3))
    return initial_vacuum(CoupledState(U, Hc, phi, 0.0), cfg)


def perturbed_state(cfg: CoupledConfig, delta: float = 0.05) -> CoupledState:
    U = perturbed_plasma(cfg.slab, cfg.torus, delta)
    phi = np.zeros((cfg.torus.n2, cfg.torus.n3))
    Hc = np.zeros((3, cfg.slab.n1m, cfg.torus.n2, cfg.torus.n3))
    return initial_vacuum(CoupledState(U, Hc, phi, 0.0), cfg)


# ---------------------------------------------------------------------------
# Manufactured vacuum fields
# ---------------------------------------------------------------------------

def harmonic_vacuum(slab: SlabGrid, torus: TorusGrid, phi: np.ndarray):
    """Data and exact Hcal for grad(exp(2 pi x) cos(2 pi y)/(2 pi)) under a front phi.

    The physical field is curl- and divergence-free, so its straightened
    pullback solves the homogeneous interior equations with the normal trace
    on Gamma and the tangential trace on the outer wall taken from it.
    """
    from .geometry import extend_modewise
    from .vacuum_elliptic import DivCurlData

    X2, _ = torus.mesh()
    psi = extend_modewise(phi, slab, torus)[: slab.i0 + 1]
    x = slab.x1m[:, None, None] + psi
    k = 2 * np.pi
    ex = np.exp(k * x)
    H = np.stack([ex * np.cos(k * X2), -ex * np.sin(k * X2), 0 * ex])
    HN = H[0, -1] - H[1, -1] * d2(phi)
    data = DivCurlData(np.zeros((3,) + x.shape), np.zeros(x.shape), HN, nu_cross(H[:, 0]))
    return data, H


def single_mode_vacuum(slab: SlabGrid, torus: TorusGrid):
    """Flat data g3 = cos(2 pi x2), all else zero, with its closed-form solution."""
    from .vacuum_elliptic import DivCurlData

    X2, _ = torus.mesh()
    k = 2 * np.pi
    x = slab.x1m[:, None, None] + 1.0
    c = 1.0 / (k * np.cosh(k))
    H = np.stack([c * k * np.cosh(k * x) * np.cos(k * X2),
                  -c * k * np.sinh(k * x) * np.sin(k * X2), 0 * x * X2])
    z = np.zeros((slab.n1m, torus.n2, torus.n3))
    data = DivCurlData(np.zeros((3,) + z.shape), z, np.cos(k * X2), np.zeros((3, torus.n2, torus.n3)))
    return data, H
