"""Div-curl solver for the vacuum field in straightened coordinates.

Unknown: the straightened field Hfrak on the vacuum grid x1 in [-1, 0].

    curl Hfrak = chi,  div(A Hfrak) = Xi       in the vacuum slab
    (A Hfrak)_1 = g3                            on x1 = 0
    nu x Hfrak = g5                             on x1 = -1, nu = (-1, 0, 0)

Stage 1 builds a divergence-free zeta with curl zeta = chi and the boundary
traces, mode by mode.  Stage 2 adds grad xi from the weighted Neumann
problem, collocated at the nodes and solved by GMRES preconditioned with the
flat-geometry operator.  Both stages use an exponentially fitted element in
x1, which is exact for the homogeneous constant-coefficient mode equations;
the metric correction A - I is applied with the ordinary nodal stencils.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import CompatibilityViolated, SolverDiverged
from .geometry import (MetricPack, _deriv_wavenumbers, curl, d1, d2, d3, div,
                       frak_H, frak_H_inverse, mat_vec, trapezoid_weights)


def nu_cross(F: np.ndarray) -> np.ndarray:
    """nu x F with nu = (-1, 0, 0)."""
    return np.stack([np.zeros_like(F[0]), F[2], -F[1]])


@dataclass(frozen=True)
class DivCurlData:
    chi: np.ndarray
    Xi: np.ndarray
    g3: np.ndarray
    g5: np.ndarray

    @classmethod
    def zeros(cls, n1m: int, n2: int, n3: int) -> "DivCurlData":
        return cls(np.zeros((3, n1m, n2, n3)), np.zeros((n1m, n2, n3)),
                   np.zeros((n2, n3)), np.zeros((3, n2, n3)))

    def __add__(self, other):
        return DivCurlData(self.chi + other.chi, self.Xi + other.Xi,
                           self.g3 + other.g3, self.g5 + other.g5)

    def scale(self, c):
        return DivCurlData(c * self.chi, c * self.Xi, c * self.g3, c * self.g5)


@dataclass(frozen=True)
class VacuumField:
    Hcal: np.ndarray

    def frak_H(self, m: MetricPack) -> np.ndarray:
        return frak_H(self.Hcal, m)

    def frak_h(self, m: MetricPack) -> np.ndarray:
        return mat_vec(m.Amat, frak_H(self.Hcal, m))

    @classmethod
    def from_frak_H(cls, Hfrak: np.ndarray, m: MetricPack) -> "VacuumField":
        return cls(frak_H_inverse(Hfrak, m))


@dataclass
class VacuumSolution:
    Hfrak: np.ndarray
    Hcal: np.ndarray
    iterations: int
    residuals: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Fitted one-dimensional operators
# ---------------------------------------------------------------------------

def _fitted_element(kap: np.ndarray, h: float):
    """Diagonal and off-diagonal entries of the exact element matrix."""
    kap = np.asarray(kap, dtype=float)
    a = np.full(kap.shape, 1.0 / h)
    b = np.full(kap.shape, 1.0 / h)
    pos = kap > 0
    kh = kap[pos] * h
    a[pos] = kap[pos] / np.tanh(kh)
    b[pos] = kap[pos] / np.sinh(kh)
    return a, b


def _g1(kap, x):
    out = np.array(x * np.ones_like(kap), dtype=float)
    pos = kap > 0
    out[pos] = np.sinh(kap[pos] * x) / kap[pos]
    return out


def _g2(kap, x):
    out = np.array(0.5 * x * x * np.ones_like(kap), dtype=float)
    pos = kap > 0
    out[pos] = 2.0 * np.sinh(0.5 * kap[pos] * x) ** 2 / kap[pos] ** 2
    return out


def _end_weights(kap: np.ndarray, h: float):
    """Three-point derivative weights at x = 0 exact on {1, cosh, sinh}."""
    a11, a12 = _g1(kap, h), _g1(kap, 2 * h)
    a21, a22 = _g2(kap, h), _g2(kap, 2 * h)
    det = a11 * a22 - a12 * a21
    c1 = a22 / det
    c2 = -a21 / det
    return -c1 - c2, c1, c2


@dataclass(frozen=True)
class ModeSpace:
    """Tangential half-spectrum bookkeeping for real fields."""

    n1: int
    n2: int
    n3: int
    h: float

    @property
    def n3r(self) -> int:
        return self.n3 // 2 + 1

    @property
    def kd2(self) -> np.ndarray:
        return _deriv_wavenumbers(self.n2)[:, None] * np.ones((1, self.n3r))

    @property
    def kd3(self) -> np.ndarray:
        return np.ones((self.n2, 1)) * np.abs(_deriv_wavenumbers(self.n3)[: self.n3r])[None, :]

    @property
    def kappa(self) -> np.ndarray:
        return np.sqrt(self.kd2 ** 2 + self.kd3 ** 2)

    def fwd(self, f):
        return np.fft.rfft2(f, axes=(-2, -1))

    def inv(self, F):
        return np.fft.irfft2(F, s=(self.n2, self.n3), axes=(-2, -1))


@lru_cache(maxsize=16)
def _mode_space(n1: int, n2: int, n3: int, h: float) -> ModeSpace:
    return ModeSpace(n1, n2, n3, h)


def _stiffness_apply(ms: ModeSpace, U: np.ndarray) -> np.ndarray:
    """Fitted stiffness T(kappa) applied along x1 to mode data (n1, n2, n3r)."""
    a, b = _fitted_element(ms.kappa, ms.h)
    out = np.zeros_like(U)
    out[:-1] += a * U[:-1] - b * U[1:]
    out[1:] += a * U[1:] - b * U[:-1]
    return out


@lru_cache(maxsize=16)
def _factor(n1: int, n2: int, n3: int, h: float, kind: str):
    """Sparse LU of the block-diagonal fitted stiffness with one Dirichlet end.

    kind 'DN': Dirichlet at x1 = -1 (index 0); 'ND': Dirichlet at x1 = 0.
    """
    ms = _mode_space(n1, n2, n3, h)
    a, b = _fitted_element(ms.kappa.ravel(), h)
    m = n1 - 1
    nm = a.size
    diag = np.repeat(2 * a, m).reshape(nm, m)
    if kind == "DN":
        diag[:, -1] = a
    else:
        diag[:, 0] = a
    off = np.repeat(-b, m).reshape(nm, m)
    off[:, -1] = 0.0
    lower = off.ravel()[:-1]
    M = sp.diags([diag.ravel(), lower, lower], [0, -1, 1], format="csc")
    return spla.splu(M)


def _solve_modes(ms: ModeSpace, kind: str, R: np.ndarray) -> np.ndarray:
    """Solve T_kind X = R for complex mode data R of shape (n1-1, n2, n3r)."""
    lu = _factor(ms.n1, ms.n2, ms.n3, ms.h, kind)
    m = ms.n1 - 1
    flat = np.moveaxis(R, 0, -1).reshape(-1, m).ravel()
    rhs = np.stack([flat.real, flat.imag], axis=1)
    sol = lu.solve(rhs)
    X = (sol[:, 0] + 1j * sol[:, 1]).reshape(ms.n2, ms.n3r, m)
    return np.moveaxis(X, -1, 0)


def fitted_d1(ms: ModeSpace, U: np.ndarray) -> np.ndarray:
    """Fitted x1 derivative of mode data, exact on exp(+-kappa x1)."""
    kap = ms.kappa
    h = ms.h
    c = np.where(kap > 0, kap / (2 * np.sinh(np.maximum(kap, 1e-300) * h)), 1.0 / (2 * h))
    out = np.empty_like(U)
    out[1:-1] = c * (U[2:] - U[:-2])
    c0, c1, c2 = _end_weights(kap, h)
    out[0] = c0 * U[0] + c1 * U[1] + c2 * U[2]
    out[-1] = -(c0 * U[-1] + c1 * U[-2] + c2 * U[-3])
    return out


# ---------------------------------------------------------------------------
# Compatibility
# ---------------------------------------------------------------------------

@dataclass
class CompatibilityReport:
    g5_normal: float
    div_chi: float
    weak_residual: float

    def as_dict(self):
        return {"g5_normal": self.g5_normal, "div_chi": self.div_chi,
                "weak_residual": self.weak_residual}


def check_compatibility(data: DivCurlData, x1: np.ndarray) -> CompatibilityReport:
    """Residuals of g5.nu = 0, div chi = 0 and the weak identity on test fields.

    Test fields are eta = e1 and eta = grad(x1 cos(2 pi k.x')) for a few k,
    all curl-free and normal on x1 = 0.
    """
    n2, n3 = data.g3.shape
    g5n = float(np.max(np.abs(data.g5[0])))
    dchi = float(np.max(np.abs(div(data.chi, x1))))
    X2, X3 = np.meshgrid(np.arange(n2) / n2, np.arange(n3) / n3, indexing="ij")
    w = trapezoid_weights(x1)

    def vol(f):
        return float(np.tensordot(w, f.mean(axis=(-2, -1)), axes=(0, 0)))

    res = abs(vol(data.chi[0]) - float(np.mean(data.g5[0])))
    X1 = x1[:, None, None]
    for k2, k3 in ((0, 0), (1, 0), (0, 1), (1, 1)):
        for trig, dtrig in ((np.cos, lambda s: -np.sin(s)), (np.sin, np.cos)):
            arg = 2 * np.pi * (k2 * X2 + k3 * X3)
            eta = np.stack([np.broadcast_to(trig(arg), (x1.size, n2, n3)),
                            X1 * 2 * np.pi * k2 * dtrig(arg),
                            X1 * 2 * np.pi * k3 * dtrig(arg)])
            lhs = vol(np.sum(data.chi * eta, axis=0))
            rhs = float(np.mean(np.sum(data.g5 * eta[:, 0], axis=0)))
            res = max(res, abs(lhs - rhs))
    return CompatibilityReport(g5n, dchi, res)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

def _stage_one(ms: ModeSpace, data: DivCurlData, x1: np.ndarray) -> np.ndarray:
    """Divergence-free zeta with curl zeta = chi, zeta1 = 0 on Gamma, nu x zeta = g5."""
    n1 = ms.n1
    w = trapezoid_weights(x1)[:, None, None]
    a, b = _fitted_element(ms.kappa, ms.h)
    c = ms.fwd(curl(data.chi, x1))
    chi0 = ms.fwd(data.chi[:, -1])
    g5 = ms.fwd(data.g5)
    zeta = np.zeros((3, n1, ms.n2, ms.n3r), dtype=complex)

    # tangential components: Dirichlet at x1 = -1, Neumann at x1 = 0
    for comp, dval, flux in ((1, -g5[2], chi0[2]), (2, g5[1], -chi0[1])):
        R = w * c[comp]
        R[-1] += flux
        R[1] += b * dval
        zeta[comp, 1:] = _solve_modes(ms, "DN", R[1:])
        zeta[comp, 0] = dval
    # normal component: Neumann at x1 = -1 from div zeta = 0, Dirichlet 0 on Gamma
    dz1 = -1j * ms.kd2 * zeta[1, 0] - 1j * ms.kd3 * zeta[2, 0]
    R = w * c[0]
    R[0] -= dz1
    zeta[0, :-1] = _solve_modes(ms, "ND", R[:-1])
    return zeta


@lru_cache(maxsize=16)
def _factor_nodal(n1: int, n2: int, n3: int, h: float):
    """Sparse LU of the flat nodal operator: -T/h at interior nodes, fitted d1 on Gamma.

    Unknowns are the nodes 1..n1-1 of every mode; node 0 carries xi = 0.
    """
    ms = _mode_space(n1, n2, n3, h)
    kap = ms.kappa.ravel()
    a, b = _fitted_element(kap, h)
    c0, c1, c2 = _end_weights(kap, h)
    m = n1 - 1
    rows, cols, vals = [], [], []
    for k in range(kap.size):
        base = k * m
        for i in range(m - 1):
            rows.append(base + i)
            cols.append(base + i)
            vals.append(-2 * a[k] / h)
            if i > 0:
                rows.append(base + i)
                cols.append(base + i - 1)
                vals.append(b[k] / h)
            rows.append(base + i)
            cols.append(base + i + 1)
            vals.append(b[k] / h)
        r = base + m - 1
        rows += [r, r, r]
        cols += [base + m - 1, base + m - 2, base + m - 3]
        vals += [-c0[k], -c1[k], -c2[k]]
    M = sp.csc_matrix((vals, (rows, cols)), shape=(kap.size * m, kap.size * m))
    return spla.splu(M)


def _solve_nodal(ms: ModeSpace, R: np.ndarray) -> np.ndarray:
    lu = _factor_nodal(ms.n1, ms.n2, ms.n3, ms.h)
    m = ms.n1 - 1
    flat = np.moveaxis(R, 0, -1).reshape(-1, m).ravel()
    sol = lu.solve(np.stack([flat.real, flat.imag], axis=1))
    X = (sol[:, 0] + 1j * sol[:, 1]).reshape(ms.n2, ms.n3r, m)
    return np.moveaxis(X, -1, 0)


def _fitted_grad(ms: ModeSpace, xh: np.ndarray) -> np.ndarray:
    return np.stack([fitted_d1(ms, xh), 1j * ms.kd2 * xh, 1j * ms.kd3 * xh])


def _flat_nodal_apply(ms: ModeSpace, xh: np.ndarray) -> np.ndarray:
    """Flat nodal operator on full mode data (node 0 included, ignored in the output)."""
    out = -_stiffness_apply(ms, xh) / ms.h
    out[-1] = fitted_d1(ms, xh)[-1]
    return out


def _residuals(Hfrak, data: DivCurlData, m: MetricPack) -> dict:
    x1 = m.x1
    Ah = mat_vec(m.Amat, Hfrak)
    return {
        "curl": float(np.max(np.abs(curl(Hfrak, x1) - data.chi))),
        "div": float(np.max(np.abs(div(Ah, x1) - data.Xi))),
        "normal_trace": float(np.max(np.abs(Ah[0, -1] - data.g3))),
        "tangential_trace": float(np.max(np.abs(nu_cross(Hfrak[:, 0]) - data.g5))),
    }


def solve_divcurl(data: DivCurlData, m: MetricPack, rtol: float = 1e-10,
                  compat_tol: float | None = 1e-8) -> VacuumSolution:
    """Solve the straightened div-curl system on the vacuum grid of ``m``."""
    x1 = m.x1
    n1 = x1.size
    n2, n3 = data.g3.shape
    h = float(x1[1] - x1[0])
    if compat_tol is not None:
        scale = 1.0 + float(np.max(np.abs(data.chi))) + float(np.max(np.abs(data.g5)))
        g5n = float(np.max(np.abs(data.g5[0])))
        dchi = float(np.max(np.abs(div(data.chi, x1))))
        if g5n > compat_tol * scale or dchi > compat_tol * scale * n1:
            raise CompatibilityViolated(
                f"incompatible data: |g5.nu| = {g5n:.3g}, |div chi| = {dchi:.3g}")
    ms = _mode_space(n1, n2, n3, h)
    zeta_hat = _stage_one(ms, data, x1)
    zeta = ms.inv(zeta_hat)

    # stage 2: xi = 0 on x1 = -1, div(A(zeta + grad xi)) = Xi, (A(zeta + grad xi))_1 = g3
    # on Gamma; flat part fitted per mode, (A - I) part collocated at the nodes
    AmI = m.Amat - np.eye(3)[:, :, None, None, None]
    Ez = mat_vec(AmI, zeta)
    b = data.Xi - div(Ez, x1)
    b[-1] = data.g3 - Ez[0, -1]
    shape = (n1 - 1, n2, n3)

    def apply_L(y):
        xi = np.zeros((n1, n2, n3))
        xi[1:] = y.reshape(shape)
        xh = ms.fwd(xi)
        out = ms.inv(_flat_nodal_apply(ms, xh))
        E = mat_vec(AmI, ms.inv(_fitted_grad(ms, xh)))
        corr = div(E, x1)
        corr[-1] = E[0, -1]
        return (out + corr)[1:].ravel()

    def apply_P(r):
        R = ms.fwd(r.reshape(shape))
        return ms.inv(_solve_nodal(ms, R)).ravel()

    N = (n1 - 1) * n2 * n3
    L = spla.LinearOperator((N, N), matvec=apply_L, dtype=float)
    P = spla.LinearOperator((N, N), matvec=apply_P, dtype=float)
    rhs = b[1:].ravel()
    its = [0]

    def count(_):
        its[0] += 1

    if np.max(np.abs(rhs)) == 0.0:
        y = np.zeros(N)
    else:
        y, info = spla.gmres(L, rhs, x0=apply_P(rhs), rtol=rtol, atol=0.0, restart=60,
                             maxiter=20, M=P, callback=count, callback_type="pr_norm")
        if info != 0:
            raise SolverDiverged(f"GMRES stopped after {its[0]} iterations without converging")
    xi = np.zeros((n1, n2, n3))
    xi[1:] = y.reshape(shape)
    xh = ms.fwd(xi)
    Hfrak = ms.inv(zeta_hat + _fitted_grad(ms, xh))
    return VacuumSolution(Hfrak=Hfrak, Hcal=frak_H_inverse(Hfrak, m),
                          iterations=its[0], residuals=_residuals(Hfrak, data, m))


# ---------------------------------------------------------------------------
# Orthogonal decomposition
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _gradient_matrix(n1: int, h: float) -> np.ndarray:
    # first-order ends: with trapezoid weights this pair sums by parts exactly
    return np.gradient(np.eye(n1), h, axis=0, edge_order=1)


def helmholtz_decompose(v: np.ndarray, x1: np.ndarray):
    """Split v into (curl_part, grad_part, phi) with phi = 0 on x1 = -1.

    grad_part is the discrete L2 projection of v onto gradients (trapezoid
    weights in x1), so the two parts are orthogonal in that inner product.
    The x1 difference operator sums by parts against those weights, which
    keeps divergence-free fields with zero normal trace on Gamma free of a
    spurious gradient layer at x1 = -1.
    """
    n1 = x1.size
    n2, n3 = v.shape[-2:]
    h = float(x1[1] - x1[0])
    ms = _mode_space(n1, n2, n3, h)
    D = _gradient_matrix(n1, h)
    W = np.diag(trapezoid_weights(x1))
    K = D.T @ W @ D
    kap2 = (ms.kd2 ** 2 + ms.kd3 ** 2).ravel()
    mats = K[None, 1:, 1:] + kap2[:, None, None] * W[None, 1:, 1:]
    V = ms.fwd(v)
    wv = trapezoid_weights(x1)[:, None, None]
    rhs = (np.tensordot(D.T @ W, V[0], axes=(1, 0))
           - 1j * ms.kd2 * wv * V[1] - 1j * ms.kd3 * wv * V[2])
    rhs = np.moveaxis(rhs[1:], 0, -1).reshape(-1, n1 - 1)
    try:
        sol = np.linalg.solve(mats, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SolverDiverged(str(exc)) from exc
    Phi = np.zeros((n1, n2, ms.n3r), dtype=complex)
    Phi[1:] = np.moveaxis(sol.reshape(n2, ms.n3r, n1 - 1), -1, 0)
    phi = ms.inv(Phi)
    g = np.stack([np.tensordot(D, phi, axes=(1, 0)), d2(phi), d3(phi)])
    return v - g, g, phi


def weighted_inner(a: np.ndarray, b: np.ndarray, x1: np.ndarray) -> float:
    w = trapezoid_weights(x1)
    return float(np.tensordot(w, np.sum(a * b, axis=0).mean(axis=(-2, -1)), axes=(0, 0)))
