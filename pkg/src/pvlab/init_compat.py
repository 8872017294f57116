"""Time-derivative cascade of the initial data, compatibility reports and the
approximate solution built from the cascade.

Plasma jets come from Taylor coefficients of the straightened right-hand side
evaluated on a small circle of complex times; the right-hand side is a
real-analytic function of (U, Psi, dPsi/dt), so the coefficient of order j
only depends on the jets already known.  Front jets follow from the kinematic
condition by the Leibniz rule and vacuum jets from elliptic solves whose data
collect the lower-order products of the field with the lifted front.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb, factorial

import numpy as np

from .exceptions import EllipticSolveFailed, PvlabError
from .geometry import (SlabGrid, TorusGrid, curl, d1, d2, d3, div, extend_modewise,
                       front_metric)
from .interface import SurfaceCurrent, front_normal_velocity
from .plasma import Eos, cfl_dt, induction_rhs, plasma_rhs, straightened_operator
from .vacuum_elliptic import DivCurlData, solve_divcurl

CONTOUR_POINTS = 32


@dataclass
class InitialDataBundle:
    U0: np.ndarray
    phi0: np.ndarray
    jext: SurfaceCurrent
    slab: SlabGrid
    torus: TorusGrid
    eos: Eos = field(default_factory=Eos)
    rtol: float = 1e-12
    U: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    Hcal: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.U) - 1


def _lift(b: InitialDataBundle, g):
    return extend_modewise(g, b.slab, b.torus)


def _taylor(jets, t):
    out = 0 * jets[0] + 0j * t
    for i, c in enumerate(jets):
        out = out + c * (t ** i / factorial(i))
    return out


def _leibniz_vN(b: InitialDataBundle, j: int) -> np.ndarray:
    """j-th time derivative of v_N = v1 - v2 d2phi - v3 d3phi on Gamma."""
    out = b.U[j][1, 0].copy()
    for i in range(j + 1):
        c = comb(j, i)
        out -= c * (b.U[i][2, 0] * d2(b.phi[j - i]) + b.U[i][3, 0] * d3(b.phi[j - i]))
    return out


def _vacuum_products(H, dPsi_grad):
    """Parts of Hfrak and hfrak that are bilinear in (Hcal, grad Psi)."""
    g1, g2, g3 = dPsi_grad
    c = H[0] * dPsi_grad
    dd = np.stack([-H[1] * g2 - H[2] * g3, H[1] * g1, H[2] * g1])
    return c, dd


def _vacuum_jet(b: InitialDataBundle, j: int, metric0, t: float = 0.0, phis=None, Hs=None,
                g5=None):
    """Solve for the j-th vacuum jet given lower jets of Hcal and jets of phi."""
    phis = b.phi if phis is None else phis
    Hs = b.Hcal if Hs is None else Hs
    slab, tor = b.slab, b.torus
    mv = metric0.vacuum
    n1m = slab.n1m
    c = np.zeros((3, n1m, tor.n2, tor.n3))
    dd = np.zeros_like(c)
    for i in range(j):
        P = _lift(b, phis[j - i])
        grad = np.stack([d1(P, slab.x1), d2(P), d3(P)])[:, : slab.i0 + 1]
        ci, di = _vacuum_products(Hs[i], grad)
        c += comb(j, i) * ci
        dd += comb(j, i) * di
    if g5 is None:
        g5 = b.jext.derivative(t, j)
    data = DivCurlData(chi=-curl(c, mv.x1), Xi=-div(dd, mv.x1), g3=-dd[0, -1], g5=g5)
    try:
        sol = solve_divcurl(data, mv, rtol=b.rtol, compat_tol=None)
    except PvlabError as e:
        raise EllipticSolveFailed(f"vacuum jet {j}: {e}") from e
    return sol.Hcal


def _plasma_jet(b: InitialDataBundle, j: int, radius: float) -> np.ndarray:
    """U_{j+1} as j! times the order-j Taylor coefficient of U_t along the circle."""
    M = CONTOUR_POINTS
    coef = 0
    for k in range(M):
        z = radius * np.exp(2j * np.pi * k / M)
        Uz = _taylor(b.U[: j + 1], z)
        phiz = _taylor(b.phi[: j + 1], z)
        phitz = _taylor(b.phi[1: j + 2], z)
        m = front_metric(phiz, b.slab, b.torus, phitz, check=False)
        F = plasma_rhs(Uz, m.plasma, b.eos, check=False)
        coef = coef + F * np.exp(-2j * np.pi * j * k / M)
    coef = coef / (M * radius ** j)
    return np.real(coef) * factorial(j)


def derivative_cascade(bundle: InitialDataBundle, J: int = 2) -> InitialDataBundle:
    """Fill U_j, phi_j, Hcal_j for j <= J."""
    b = bundle
    b.U = [np.asarray(b.U0, dtype=float)]
    b.phi = [np.asarray(b.phi0, dtype=float)]
    m0 = front_metric(b.phi0, b.slab, b.torus, front_normal_velocity(b.U0, b.phi0))
    radius = 0.2 * cfl_dt(b.U0, m0.plasma, b.torus, b.eos)
    b.phi.append(_leibniz_vN(b, 0))
    m0 = front_metric(b.phi0, b.slab, b.torus, b.phi[1])
    b.Hcal = [_vacuum_jet(b, 0, m0)]
    for j in range(J):
        b.U.append(_plasma_jet(b, j, radius))
        b.phi.append(_leibniz_vN(b, j + 1))
    for j in range(1, J + 1):
        b.Hcal.append(_vacuum_jet(b, j, m0))
    b.phi = b.phi[: J + 1]
    return b


@dataclass
class CompatReport:
    pressure_jump: list
    wall_v1: list
    trace_proxy: float
    tolerance: float

    def ok(self) -> bool:
        vals = self.pressure_jump + self.wall_v1 + [self.trace_proxy]
        return max(vals) <= self.tolerance

    def as_dict(self):
        return {"pressure_jump": self.pressure_jump, "wall_v1": self.wall_v1,
                "trace_proxy": self.trace_proxy, "tolerance": self.tolerance,
                "ok": self.ok()}


def pressure_jump_residual(b: InitialDataBundle, j: int) -> np.ndarray:
    """q_j - d^j/dt^j (|Hcal|^2/2) on Gamma."""
    s = np.zeros_like(b.U[0][0, 0])
    for i in range(j + 1):
        s += 0.5 * comb(j, i) * np.sum(b.Hcal[i][:, -1] * b.Hcal[j - i][:, -1], axis=0)
    return b.U[j][0, 0] - s


def check_compat_order(b: InitialDataBundle, k: int, tol: float = 1e-8) -> CompatReport:
    """Residuals of the compatibility relations up to order k - 1.

    The weighted boundary integral at order k - 1 is replaced by the
    maximum of |v1| of that jet on Gamma.
    """
    if b.depth < k - 1:
        raise ValueError(f"cascade depth {b.depth} < {k - 1}")
    pj = [float(np.max(np.abs(pressure_jump_residual(b, j)))) for j in range(k)]
    wv = [float(np.max(np.abs(b.U[j][1, -1]))) for j in range(max(k - 1, 0))]
    proxy = float(np.max(np.abs(b.U[k - 1][1, 0]))) if k >= 1 else 0.0
    return CompatReport(pj, wv, proxy, tol)


# ---------------------------------------------------------------------------
# Approximate solution
# ---------------------------------------------------------------------------

@dataclass
class ApproximateSolution:
    times: np.ndarray
    U: list
    Hcal: list
    phi: list
    fa: list

    @property
    def fa_norms(self) -> np.ndarray:
        return np.array([float(np.max(np.abs(f))) for f in self.fa])


def _dtaylor(jets, t):
    return _taylor(jets[1:], t).real if len(jets) > 1 else 0 * jets[0]


def build_approximate_solution(b: InitialDataBundle, times, J: int = 1,
                               substeps: int = 20) -> ApproximateSolution:
    """Approximate solution and residual f^a = -P(U^a, Psi^a) at the sample times.

    The cascade must be filled to depth J + 1.  v, S and the interior q
    follow the Taylor polynomial; phi solves the kinematic law and H the
    induction law along the polynomial velocity; Hcal is solved at each
    time and q is corrected on Gamma by a lifted trace so that the pressure
    balance holds exactly.
    """
    if b.depth < J + 1:
        raise ValueError(f"cascade depth {b.depth} < {J + 1}")
    jets = b.U[: J + 2]
    slab, tor = b.slab, b.torus
    i0 = slab.i0
    times = np.asarray(sorted(times), dtype=float)

    def taylor_at(t):
        return _taylor(jets, t).real, _dtaylor(jets, t)

    def rhs(y, t):
        H, phi = y
        U, _ = taylor_at(t)
        U = U.copy()
        U[4:7] = H
        vN = front_normal_velocity(U, phi)
        m = front_metric(phi, slab, tor, vN, check=False)
        return induction_rhs(H, U[1:4], m.plasma), vN

    y = (b.U[0][4:7].copy(), b.phi[0].copy())
    t = 0.0
    out = ApproximateSolution(times, [], [], [], [])
    for T in times:
        n = substeps
        dt = (T - t) / n
        for _ in range(n):
            k1 = rhs(y, t)
            k2 = rhs(tuple(a + 0.5 * dt * k for a, k in zip(y, k1)), t + 0.5 * dt)
            k3 = rhs(tuple(a + 0.5 * dt * k for a, k in zip(y, k2)), t + 0.5 * dt)
            k4 = rhs(tuple(a + dt * k for a, k in zip(y, k3)), t + dt)
            y = tuple(a + dt / 6 * (p + 2 * q + 2 * r + s)
                      for a, p, q, r, s in zip(y, k1, k2, k3, k4))
            t += dt
        H, phi = y
        U, Ut = taylor_at(T)
        U = U.copy()
        Ut = Ut.copy()
        U[4:7] = H
        vN = front_normal_velocity(U, phi)
        m = front_metric(phi, slab, tor, vN, check=False)
        Ut[4:7] = induction_rhs(H, U[1:4], m.plasma)
        # vacuum field and its time derivative at the current geometry
        bt = replace(b, phi=[phi, vN], Hcal=[])
        Hc = _vacuum_jet(bt, 0, m, t=T, phis=[phi, vN], Hs=[])
        Hc_t = _vacuum_jet(bt, 1, m, t=T, phis=[phi, vN], Hs=[Hc])
        # lifted correction of q so that q = |Hcal|^2/2 on Gamma
        gap = 0.5 * np.sum(Hc[:, -1] ** 2, axis=0) - U[0, 0]
        gap_t = np.sum(Hc[:, -1] * Hc_t[:, -1], axis=0) - Ut[0, 0]
        U[0] += extend_modewise(gap, slab, tor)[i0:]
        Ut[0] += extend_modewise(gap_t, slab, tor)[i0:]
        # d(vN)/dt enters Psi_t only through the metric rebuilt above
        fa = -straightened_operator(U, Ut, m.plasma, b.eos)
        out.U.append(U)
        out.Hcal.append(Hc)
        out.phi.append(phi.copy())
        out.fa.append(fa)
    return out


def fit_slope(times, values) -> float:
    """Least-squares slope of log(values) against log(times)."""
    lt = np.log(np.asarray(times))
    lv = np.log(np.maximum(np.asarray(values), 1e-300))
    return float(np.polyfit(lt, lv, 1)[0])
