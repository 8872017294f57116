"""Regularized hyperbolic vacuum system, its secondary symmetrizers and the epsilon sweep.

The regularized Maxwell system is stepped in field form,

    eps A dHfrak/dt = -curl Efrak,   eps A dEfrak/dt = curl Hfrak - s A Efrak,

with optional Ohmic damping s >= 0 used only to relax towards the
steady state.  Boundary conditions: tangential Efrak vanishes on Gamma
(the interface terms of the regularized problem vanish for a frozen flat
perturbation of the front and zero auxiliary coefficients), tangential
Hfrak is prescribed on the outer wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CflViolated, HyperbolicityViolated
from .geometry import MetricPack, SlabGrid, TorusGrid, curl, d2, d3, front_metric, mat_vec
from .plasma import rk4
from .vacuum_elliptic import DivCurlData, solve_divcurl


# ---------------------------------------------------------------------------
# Secondary symmetrizers
# ---------------------------------------------------------------------------

def cutoff(x1: np.ndarray) -> np.ndarray:
    """Cubic cutoff with chi(-1) = 0, chi(0) = 1 and flat ends."""
    s = np.clip(np.asarray(x1, dtype=float) + 1.0, 0.0, 1.0)
    return 3 * s ** 2 - 2 * s ** 3


def nu_field(v_trace: np.ndarray, phi: np.ndarray, x1: np.ndarray) -> np.ndarray:
    """nu = chi (v2 d2phi + v3 d3phi, v2, v3) with v taken on the interface."""
    chi = cutoff(x1)[:, None, None]
    base = np.stack([v_trace[1] * d2(phi) + v_trace[2] * d3(phi), v_trace[1], v_trace[2]])
    return chi[None] * base[:, None]


def frak_B(nu: np.ndarray, eps: float):
    """The four 6x6 matrix fields, leading indices (6, 6) then grid."""
    n1, n2, n3 = nu
    z = np.zeros_like(n1)
    o = np.ones_like(n1)
    e = eps
    ie = o / eps
    B0 = np.array([
        [o, z, z, z, e * n3, -e * n2],
        [z, o, z, -e * n3, z, e * n1],
        [z, z, o, e * n2, -e * n1, z],
        [z, -e * n3, e * n2, o, z, z],
        [e * n3, z, -e * n1, z, o, z],
        [-e * n2, e * n1, z, z, z, o]])
    B1 = np.array([
        [n1, n2, n3, z, z, z],
        [n2, -n1, z, z, z, -ie],
        [n3, z, -n1, z, ie, z],
        [z, z, z, n1, n2, n3],
        [z, z, ie, n2, -n1, z],
        [z, -ie, z, n3, z, -n1]])
    B2 = np.array([
        [-n2, n1, z, z, z, ie],
        [n1, n2, n3, z, z, z],
        [z, n3, -n2, -ie, z, z],
        [z, z, -ie, -n2, n1, z],
        [z, z, z, n1, n2, n3],
        [ie, z, z, z, n3, -n2]])
    B3 = np.array([
        [-n3, z, n1, z, -ie, z],
        [z, -n3, n2, ie, z, z],
        [n1, n2, n3, z, z, z],
        [z, ie, z, -n3, z, n1],
        [-ie, z, z, z, -n3, n2],
        [z, z, z, n1, n2, n3]])
    return B0, B1, B2, B3


def _matmul(A, B):
    return np.einsum("ij...,jk...->ik...", A, B)


def _transpose(A):
    return np.swapaxes(A, 0, 1)


@dataclass
class SecondarySymmetrizers:
    eps: float
    nu: np.ndarray
    B: tuple
    B1tilde: np.ndarray
    K: np.ndarray
    M: tuple


def assemble_secondary(m: MetricPack, v_trace: np.ndarray, phi: np.ndarray,
                       eps: float) -> SecondarySymmetrizers:
    """Populate the printed matrix arrays and their congruences with K = I2 (x) eta."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    nu = nu_field(v_trace, phi, m.x1)
    B0, B1, B2, B3 = frak_B(nu, eps)
    J = m.d1Phi1
    B1t = (B1 - B2 * m.d2psi - B3 * m.d3psi) / J
    eta = np.broadcast_to(m.eta, (3, 3) + nu.shape[1:])
    K = np.zeros((6, 6) + nu.shape[1:])
    K[:3, :3] = eta
    K[3:, 3:] = eta
    Kt = _transpose(K)

    def cong(Bm):
        return _matmul(_matmul(K, Bm), Kt) / J

    M = (cong(B0), cong(B1t), cong(B2), cong(B3))
    return SecondarySymmetrizers(eps, nu, (B0, B1, B2, B3), B1t, K, M)


@dataclass
class HyperbolicityReport:
    min_margin: float
    min_eig: float
    signs_agree: bool

    def ok(self) -> bool:
        return self.min_margin > 0 and self.min_eig > 0

    def as_dict(self):
        return {"min_margin": self.min_margin, "min_eig": self.min_eig,
                "signs_agree": self.signs_agree}


def _nodes(A):
    n = A.shape[0]
    return np.moveaxis(A.reshape(n, n, -1), -1, 0)


def check_hyperbolicity(symm: SecondarySymmetrizers, tol: float = 1e-12) -> HyperbolicityReport:
    """min(1 - eps|nu|) and min eig of the zeroth symmetrizer, with nodewise sign agreement."""
    margin = 1.0 - symm.eps * np.sqrt(np.sum(symm.nu ** 2, axis=0)).ravel()
    eig = np.linalg.eigvalsh(_nodes(symm.B[0]))[:, 0]
    agree = bool(np.all((np.abs(margin) <= tol) | (np.abs(eig) <= tol)
                        | (np.sign(margin) == np.sign(eig))))
    return HyperbolicityReport(float(margin.min()), float(eig.min()), agree)


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

@dataclass
class RegState:
    Hfrak: np.ndarray
    Efrak: np.ndarray
    eps: float
    t: float = 0.0


@dataclass
class RegBC:
    """Tangential Hfrak (components 2, 3) on the outer wall and the damping rate."""

    H_wall: np.ndarray
    damping: float = 0.0
    Ehat: np.ndarray | None = None


def _Ainv(m: MetricPack) -> np.ndarray:
    A = np.broadcast_to(m.Amat, m.Amat.shape)
    inv = np.linalg.inv(np.moveaxis(A, (0, 1), (-2, -1)))
    return np.moveaxis(inv, (-2, -1), (0, 1))


def reg_cfl(m: MetricPack, torus: TorusGrid, eps: float) -> float:
    lam = np.linalg.eigvalsh(np.moveaxis(m.Amat, (0, 1), (-2, -1)))[..., 0].min()
    c = 1.0 / (eps * lam)
    h = float(m.x1[1] - m.x1[0])
    return 1.0 / (c / h + np.pi * c * (torus.n2 + torus.n3))


def _impose(H, E, bc: RegBC):
    H = H.copy()
    E = E.copy()
    H[1:3, 0] = bc.H_wall
    E[1:3, -1] = 0.0
    return H, E


def boundary_fluxes(state: RegState, U_plasma: np.ndarray | None = None) -> dict:
    """Outer-boundary energy fluxes: int q v1 on the top wall and the Poynting term on the bottom wall."""
    H, E = state.Hfrak[:, 0], state.Efrak[:, 0]
    jm = float(np.mean(E[2] * H[1] - E[1] * H[2])) / state.eps
    jp = 0.0 if U_plasma is None else float(np.mean(U_plasma[0, -1] * U_plasma[1, -1]))
    return {"J_plus": jp, "J_minus": jm}


def step_regularized(state: RegState, m: MetricPack, torus: TorusGrid, bc: RegBC, dt: float,
                     symm: SecondarySymmetrizers | None = None, cfl_number: float = 1.0,
                     U_plasma: np.ndarray | None = None, Ainv=None):
    """One RK4 step; returns (state, boundary flux report)."""
    if symm is not None:
        rep = check_hyperbolicity(symm)
        if not rep.ok():
            raise HyperbolicityViolated(
                f"secondary symmetrizer not positive: min(1 - eps|nu|) = {rep.min_margin:.3g}")
    eps = state.eps
    lim = cfl_number * reg_cfl(m, torus, eps)
    if dt > lim * (1 + 1e-12):
        raise CflViolated(f"dt = {dt:.4g} exceeds the regularized CFL cap {lim:.4g} (scales with eps)")
    Ai = _Ainv(m) if Ainv is None else Ainv
    x1 = m.x1
    s = bc.damping

    def f(y, t):
        H, E = y[:3], y[3:]
        dH = -mat_vec(Ai, curl(E, x1)) / eps
        dE = (mat_vec(Ai, curl(H, x1)) - s * E) / eps
        return np.concatenate([dH, dE])

    def post(y, t):
        H, E = _impose(y[:3], y[3:], bc)
        return np.concatenate([H, E])

    y = post(np.concatenate([state.Hfrak, state.Efrak]), state.t)
    y = rk4(f, y, dt, state.t, post)
    new = RegState(y[:3], y[3:], eps, state.t + dt)
    return new, boundary_fluxes(new, U_plasma)


def reg_energy(state: RegState, m: MetricPack) -> float:
    from .geometry import integrate

    H, E = state.Hfrak, state.Efrak
    e = np.sum(H * mat_vec(m.Amat, H), axis=0) + np.sum(E * mat_vec(m.Amat, E), axis=0)
    return 0.5 * state.eps * float(integrate(e, m.x1))


# ---------------------------------------------------------------------------
# epsilon sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepReport:
    eps: list
    discrepancy: list
    steps: list
    T: float
    initial: float = 0.0
    extra: dict = field(default_factory=dict)

    def monotone(self) -> bool:
        d = self.discrepancy
        return all(d[i + 1] < d[i] for i in range(len(d) - 1))

    def as_dict(self):
        return {"eps": self.eps, "discrepancy": self.discrepancy, "steps": self.steps,
                "T": self.T, "initial": self.initial, "monotone": self.monotone()}


def _solenoidal_perturbation(m: MetricPack, torus: TorusGrid, amp: float) -> np.ndarray:
    """A^{-1} curl a with a = (0, 0, sin^2(pi x1) cos 2pi x2): div(A .) = 0, zero normal trace on Gamma."""
    X2, _ = torus.mesh()
    x1 = m.x1[:, None, None]
    a3 = np.sin(np.pi * x1) ** 2 * np.cos(2 * np.pi * X2)
    a = np.stack([0 * a3, 0 * a3, a3])
    return amp * mat_vec(_Ainv(m), curl(a, m.x1))


def epsilon_sweep(slab: SlabGrid, torus: TorusGrid, g5: np.ndarray, phi=None,
                  eps_list=(0.1, 0.05, 0.025), T: float = 0.05, damping: float = 1.0,
                  amp: float = 0.5, cfl_number: float = 0.5) -> SweepReport:
    """Distance at time T between the regularized magnetic field and the elliptic solution.

    All runs start from the elliptic solution plus the same divergence-free
    perturbation and share boundary data; the discrepancy is the max-norm
    difference of Hfrak at the fixed physical time T.
    """
    phi = np.zeros((torus.n2, torus.n3)) if phi is None else phi
    met = front_metric(phi, slab, torus)
    m = met.vacuum
    data = DivCurlData.zeros(slab.n1m, torus.n2, torus.n3)
    data = DivCurlData(data.chi, data.Xi, data.g3, np.asarray(g5, dtype=float))
    ref = solve_divcurl(data, m, rtol=1e-12).Hfrak
    H0 = ref + _solenoidal_perturbation(m, torus, amp)
    bc = RegBC(H_wall=ref[1:3, 0].copy(), damping=damping)
    Ai = _Ainv(m)
    init = float(np.max(np.abs(H0 - ref)))
    disc, steps = [], []
    for eps in eps_list:
        dt0 = cfl_number * reg_cfl(m, torus, eps)
        n = int(np.ceil(T / dt0))
        dt = T / n
        st = RegState(H0.copy(), np.zeros_like(H0), eps)
        for _ in range(n):
            st, _ = step_regularized(st, m, torus, bc, dt, Ainv=Ai)
        disc.append(float(np.max(np.abs(st.Hfrak - ref))))
        steps.append(n)
    return SweepReport(list(eps_list), disc, steps, T, init)
