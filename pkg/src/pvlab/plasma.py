"""Symmetrized ideal-MHD plasma system in straightened coordinates.

The unknown is U = (q, v, H, S) stacked as an (8, n1, n2, n3) array, with
q = p + |H|^2/2 the total pressure.  Coefficient matrices are applied in a
structured way (no 8x8 products in the hot loop); the dense matrices are
assembled only for inspection and verification.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import CflViolated, HyperbolicityViolated, NonpositivePressure
from .geometry import MetricPack, TorusGrid, d1, d2, d3, eta_apply, eta_inverse

IQ, IV, IH, IS = 0, slice(1, 4), slice(4, 7), 7


@dataclass(frozen=True)
class Eos:
    """Polytropic gas p = exp(S) rho^gamma."""

    gamma: float = 5.0 / 3.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError("adiabatic exponent must exceed 1")


def eos_eval(p, S, eos: Eos = Eos()):
    """Return (rho, rho_p) for pressure p > 0 and entropy S."""
    p = np.asarray(p)
    if np.any(np.real(p) <= 0.0):
        raise NonpositivePressure("pressure must be positive")
    rho = (p * np.exp(-S)) ** (1.0 / eos.gamma)
    return rho, rho / (eos.gamma * p)


def pressure(U: np.ndarray) -> np.ndarray:
    return U[IQ] - 0.5 * np.sum(U[IH] ** 2, axis=0)


def pack(q, v, H, S) -> np.ndarray:
    q = np.asarray(q)
    return np.concatenate([q[None], np.asarray(v), np.asarray(H), np.asarray(S)[None]])


@dataclass(frozen=True)
class PlasmaState:
    """Thin view over a packed state array."""

    U: np.ndarray

    @property
    def q(self):
        return self.U[IQ]

    @property
    def v(self):
        return self.U[IV]

    @property
    def H(self):
        return self.U[IH]

    @property
    def S(self):
        return self.U[IS]

    @property
    def p(self):
        return pressure(self.U)


def _coeffs(U: np.ndarray, eos: Eos, check: bool = True):
    p = pressure(U)
    if check and np.any(np.real(p) <= 0.0):
        raise HyperbolicityViolated(f"min pressure {np.min(np.real(p)):.3g} <= 0")
    rho = (p * np.exp(-U[IS])) ** (1.0 / eos.gamma)
    a = 1.0 / (eos.gamma * p)  # rho_p / rho
    return rho, a


# ---------------------------------------------------------------------------
# Structured matrix actions
# ---------------------------------------------------------------------------

def _apply_general(U, rho, a, c, n, F):
    """Action of the matrix with convective coefficient c and direction n.

    A_j is recovered with c = v_j, n = e_j; the unscaled straightened matrix
    d1Phi1 * Atilde1 with c = v_N - dpsi_dt, n = N.
    """
    H = U[IH]
    hn = np.sum(H * n, axis=0)
    Fq, Fv, FH, FS = F[IQ], F[IV], F[IH], F[IS]
    HF = np.sum(H * FH, axis=0)
    out = np.empty(np.broadcast_shapes(F.shape, U.shape), dtype=np.result_type(U, F, n, c))
    out[IQ] = a * c * (Fq - HF) + np.sum(n * Fv, axis=0)
    out[IV] = n * Fq + rho * c * Fv - hn * FH
    out[IH] = -a * c * H * Fq - hn * Fv + c * (FH + a * H * HF)
    out[IS] = c * FS
    return out


def apply_A0(U, F, eos: Eos = Eos(), check: bool = True):
    rho, a = _coeffs(U, eos, check)
    H = U[IH]
    HF = np.sum(H * F[IH], axis=0)
    out = np.empty(np.broadcast_shapes(F.shape, U.shape), dtype=np.result_type(U, F))
    out[IQ] = a * (F[IQ] - HF)
    out[IV] = rho * F[IV]
    out[IH] = F[IH] - a * H * (F[IQ] - HF)
    out[IS] = F[IS]
    return out


def apply_A0_inverse(U, R, eos: Eos = Eos(), check: bool = True):
    """Closed-form inverse: the (q, H) block is B^T diag(a, I) B."""
    rho, a = _coeffs(U, eos, check)
    H = U[IH]
    HR = np.sum(H * R[IH], axis=0)
    H2 = np.sum(H * H, axis=0)
    out = np.empty(np.broadcast_shapes(R.shape, U.shape), dtype=np.result_type(U, R))
    out[IQ] = (1.0 / a + H2) * R[IQ] + HR
    out[IV] = R[IV] / rho
    out[IH] = H * R[IQ] + R[IH]
    out[IS] = R[IS]
    return out


def _unit(j, like):
    e = np.zeros((3,) + (1,) * (like.ndim - 1), dtype=float)
    e[j] = 1.0
    return e


def apply_Aj(U, j: int, F, eos: Eos = Eos(), check: bool = True):
    """Action of A_j (j = 1, 2, 3) on F."""
    rho, a = _coeffs(U, eos, check)
    return _apply_general(U, rho, a, U[IV][j - 1], _unit(j - 1, U[IV]), F)


def apply_Atilde1(U, m: MetricPack, F, eos: Eos = Eos(), check: bool = True):
    rho, a = _coeffs(U, eos, check)
    v = U[IV]
    w = v[0] - v[1] * m.d2psi - v[2] * m.d3psi - m.dpsi_dt
    return _apply_general(U, rho, a, w, m.N, F) / m.d1Phi1


def derivatives(U: np.ndarray, x1: np.ndarray):
    return d1(U, x1), d2(U), d3(U)


def spatial_operator(U, m: MetricPack, eos: Eos = Eos(), dU=None, check: bool = True):
    """Atilde1 d1U + A2 d2U + A3 d3U."""
    if dU is None:
        dU = derivatives(U, m.x1)
    return (apply_Atilde1(U, m, dU[0], eos, check) + apply_Aj(U, 2, dU[1], eos, check)
            + apply_Aj(U, 3, dU[2], eos, check))


def straightened_operator(U, Ut, m: MetricPack, eos: Eos = Eos(), check: bool = True):
    """P(U, Psi) U = A0 U_t + Atilde1 d1U + A2 d2U + A3 d3U."""
    return apply_A0(U, Ut, eos, check) + spatial_operator(U, m, eos, check=check)


def plasma_rhs(U, m: MetricPack, eos: Eos = Eos(), check: bool = True):
    """U_t solving P(U, Psi) U = 0."""
    return -apply_A0_inverse(U, spatial_operator(U, m, eos, check=check), eos, check)


# ---------------------------------------------------------------------------
# Dense assembly (verification and inspection)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetrizerSet:
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    Atilde1: np.ndarray


def _dense(apply, U):
    shape = U.shape[1:]
    M = np.zeros((8, 8) + shape, dtype=U.dtype)
    for k in range(8):
        e = np.zeros((8,) + shape)
        e[k] = 1.0
        M[:, k] = apply(e)
    return M


def assemble_symmetrizers(U, m: MetricPack, eos: Eos = Eos()) -> SymmetrizerSet:
    """Dense 8x8 matrix fields of the straightened symmetric system."""
    _coeffs(U, eos, True)
    A0 = _dense(lambda e: apply_A0(U, e, eos), U)
    A1 = _dense(lambda e: apply_Aj(U, 1, e, eos), U)
    A2 = _dense(lambda e: apply_Aj(U, 2, e, eos), U)
    A3 = _dense(lambda e: apply_Aj(U, 3, e, eos), U)
    At = (A1 - A0 * m.dpsi_dt - A2 * m.d2psi - A3 * m.d3psi) / m.d1Phi1
    return SymmetrizerSet(A0, A1, A2, A3, At)


def symmetrizer_matrices_at(U_node: np.ndarray, eos: Eos = Eos()):
    """Dense A0..A3 at a single state vector of length 8 (written out entrywise)."""
    q, v, H, S = U_node[0], U_node[1:4], U_node[4:7], U_node[7]
    p = q - 0.5 * H @ H
    rho, rho_p = eos_eval(p, S, eos)
    a = rho_p / rho
    I3 = np.eye(3)
    A0 = np.zeros((8, 8))
    A0[0, 0] = a
    A0[0, 4:7] = -a * H
    A0[4:7, 0] = -a * H
    A0[1:4, 1:4] = rho * I3
    A0[4:7, 4:7] = I3 + a * np.outer(H, H)
    A0[7, 7] = 1.0
    mats = [A0]
    for j in range(3):
        e = I3[j]
        A = np.zeros((8, 8))
        A[0, 0] = a * v[j]
        A[0, 1:4] = e
        A[0, 4:7] = -a * H * v[j]
        A[1:4, 0] = e
        A[1:4, 1:4] = rho * v[j] * I3
        A[1:4, 4:7] = -H[j] * I3
        A[4:7, 0] = -a * H * v[j]
        A[4:7, 1:4] = -H[j] * I3
        A[4:7, 4:7] = (I3 + a * np.outer(H, H)) * v[j]
        A[7, 7] = v[j]
        mats.append(A)
    return mats


def cartesian_operator(U, Ut, x1, eos: Eos = Eos()):
    """A0 U_t + sum_j A_j d_j U with densely assembled matrices."""
    flat = MetricPack(x1=x1, psi=0, dpsi_dt=0, d1psi=0, d2psi=0, d3psi=0,
                      d1Phi1=1.0, eta=None, Amat=None)
    S = assemble_symmetrizers(U, flat, eos)
    dU = derivatives(U, x1)
    out = np.einsum("ij...,j...->i...", S.A0, Ut)
    for A, D in zip((S.A1, S.A2, S.A3), dU):
        out = out + np.einsum("ij...,j...->i...", A, D)
    return out


def energy_density(U, F, eos: Eos = Eos()):
    """Quadratic form (A0(U) F, F) node-wise."""
    return np.sum(apply_A0(U, F, eos) * F, axis=0)


# ---------------------------------------------------------------------------
# Transformed unknowns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransformedState:
    q: np.ndarray
    u: np.ndarray
    h: np.ndarray
    S: np.ndarray


def transform_state(U, m: MetricPack) -> TransformedState:
    return TransformedState(U[IQ].copy(), eta_apply(U[IV], m), eta_apply(U[IH], m), U[IS].copy())


def inverse_transform(T: TransformedState, m: MetricPack) -> np.ndarray:
    return pack(T.q, eta_inverse(T.u, m), eta_inverse(T.h, m), T.S)


def transformed_boundary_matrix(U, m: MetricPack, eos: Eos = Eos()) -> np.ndarray:
    """d1Phi1 R^T Atilde1 R with R = diag(1, eta^-1, eta^-1, 1), node-wise."""
    shape = U.shape[1:]
    Rcols = np.zeros((8, 8) + shape)
    for k in range(8):
        e = np.zeros((8,) + shape)
        e[k] = 1.0
        Rcols[:, k] = np.concatenate([e[:1], eta_inverse(e[1:4], m), eta_inverse(e[4:7], m), e[7:]])
    At = np.zeros((8, 8) + shape)
    for k in range(8):
        At[:, k] = apply_Atilde1(U, m, Rcols[:, k], eos)
    return m.d1Phi1 * np.einsum("ki...,kj...->ij...", Rcols, At)


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

def max_speeds(U, m: MetricPack, eos: Eos = Eos()):
    """Upper bounds of the characteristic speeds along x1 and tangentially."""
    rho, a = _coeffs(U, eos, True)
    p = pressure(U)
    cf = np.sqrt((eos.gamma * p + np.sum(U[IH] ** 2, axis=0)) / rho)
    s = np.sqrt(np.sum(U[IV] ** 2, axis=0)) + cf
    nN = np.sqrt(1.0 + m.d2psi ** 2 + m.d3psi ** 2)
    s1 = (s * nN + np.abs(m.dpsi_dt)) / m.d1Phi1
    return float(np.max(np.real(s1))), float(np.max(np.real(s)))


def cfl_dt(U, m: MetricPack, torus: TorusGrid, eos: Eos = Eos()) -> float:
    """Reference step at CFL number 1 for RK4 with the hybrid stencil."""
    s1, st = max_speeds(U, m, eos)
    h1 = float(np.min(np.diff(m.x1)))
    return 1.0 / (s1 / h1 + np.pi * st * (torus.n2 + torus.n3))


@dataclass
class PlasmaBC:
    """Interface total pressure (array or callable of t); walls v1 = H1 = 0."""

    q_bc: np.ndarray | Callable[[float], np.ndarray] | None = None

    def q_at(self, t: float):
        if self.q_bc is None:
            return None
        return self.q_bc(t) if callable(self.q_bc) else self.q_bc


def impose_bc(U: np.ndarray, q_interface=None) -> np.ndarray:
    """Strong boundary values: q at x1 = 0 and v1 = H1 = 0 at x1 = 1."""
    U = U.copy()
    if q_interface is not None:
        U[IQ, 0] = q_interface
    U[1, -1] = 0.0
    U[4, -1] = 0.0
    return U


def rk4(f, y, dt, t=0.0, post=None):
    """Classical RK4; ``post(y, t)`` is applied to every stage value."""
    post = post or (lambda z, s: z)
    k1 = f(y, t)
    y2 = post(y + 0.5 * dt * k1, t + 0.5 * dt)
    k2 = f(y2, t + 0.5 * dt)
    y3 = post(y + 0.5 * dt * k2, t + 0.5 * dt)
    k3 = f(y3, t + 0.5 * dt)
    y4 = post(y + dt * k3, t + dt)
    k4 = f(y4, t + dt)
    return post(y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), t + dt)


def step_plasma(U, m: MetricPack, bc: PlasmaBC, dt: float, torus: TorusGrid,
                eos: Eos = Eos(), t: float = 0.0, cfl_number: float = 1.0) -> np.ndarray:
    """One RK4 step of the straightened system with frozen geometry."""
    lim = cfl_number * cfl_dt(U, m, torus, eos)
    if abs(dt) > lim * (1 + 1e-12):
        raise CflViolated(f"dt = {dt:.4g} exceeds the CFL cap {lim:.4g}")

    def post(y, s):
        return impose_bc(y, bc.q_at(s))

    return rk4(lambda y, s: plasma_rhs(y, m, eos), post(U, t), dt, t, post)


# ---------------------------------------------------------------------------
# Magnetic transport
# ---------------------------------------------------------------------------

def induction_rhs(H, v, m: MetricPack):
    """H_t from the induction law in the discretisation of the symmetric system.

    The stretching term uses the product-rule expanded straightened
    divergence, so this right-hand side coincides with the H-rows of
    P(U, Psi) combined with the pressure row.
    """
    x1 = m.x1
    J = m.d1Phi1
    w = (v[0] - v[1] * m.d2psi - v[2] * m.d3psi - m.dpsi_dt) / J
    HN = (H[0] - H[1] * m.d2psi - H[2] * m.d3psi) / J
    dH1, dH2, dH3 = d1(H, x1), d2(H), d3(H)
    dv1, dv2, dv3 = d1(v, x1), d2(v), d3(v)
    divv = (dv1[0] - m.d2psi * dv1[1] - m.d3psi * dv1[2]) / J + dv2[1] + dv3[2]
    adv = w * dH1 + v[1] * dH2 + v[2] * dH3
    stretch = HN * dv1 + H[1] * dv2 + H[2] * dv3
    return -adv + stretch - H * divv


def boundary_w1(v, m: MetricPack):
    w = v[0] - v[1] * m.d2psi - v[2] * m.d3psi - m.dpsi_dt
    return max(float(np.max(np.abs(w[0]))), float(np.max(np.abs(w[-1]))))


def transport_H(H, v, m: MetricPack, dt: float, tol: float = 1e-8):
    """One RK4 step of the magnetic transport law with frozen v and geometry."""
    from .exceptions import BoundaryTransportLeak

    leak = boundary_w1(v, m)
    if leak > tol:
        raise BoundaryTransportLeak(f"boundary normal transport velocity {leak:.3g} > {tol:.3g}")
    return rk4(lambda y, s: induction_rhs(y, v, m), H, dt)
