"""Involution monitors and the linear transport laws of their residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BoundaryTransportLeak
from .geometry import MetricPack, d1, d2, d3


@dataclass
class ConstraintResiduals:
    div_h: np.ndarray
    HN_trace: np.ndarray
    H1_top: np.ndarray


def straightened_h(H: np.ndarray, m: MetricPack) -> np.ndarray:
    """h = (H_N, H2 d1Phi1, H3 d1Phi1)."""
    return np.stack([H[0] - H[1] * m.d2psi - H[2] * m.d3psi, H[1] * m.d1Phi1, H[2] * m.d1Phi1])


def constraint_residuals(U: np.ndarray, m: MetricPack) -> ConstraintResiduals:
    """div h in the plasma, H_N on the interface and H1 on the wall.

    The divergence uses the same x1 and tangential stencils as the plasma
    operator.
    """
    h = straightened_h(U[4:7], m)
    div_h = d1(h[0], m.x1) + d2(h[1]) + d3(h[2])
    return ConstraintResiduals(div_h=div_h, HN_trace=h[0][0].copy(), H1_top=U[4, -1].copy())


@dataclass
class TransportResiduals:
    """a on the plasma grid, R on x1 = 0, Rplus on x1 = 1."""

    a: np.ndarray
    R: np.ndarray
    Rplus: np.ndarray


@dataclass
class TransportCoefficients:
    """Basic-state quantities entering the residual transport laws.

    w is the straightened convective velocity (w1 = v_N - dpsi_dt, w2, w3
    scaled by d1Phi1), vR and vRplus the tangential velocities (v2, v3) on
    the two boundaries.
    """

    w: np.ndarray
    d1Phi1: np.ndarray
    x1: np.ndarray
    vR: np.ndarray
    vRplus: np.ndarray

    @classmethod
    def from_basic(cls, v: np.ndarray, m: MetricPack) -> "TransportCoefficients":
        w = np.stack([v[0] - v[1] * m.d2psi - v[2] * m.d3psi - m.dpsi_dt,
                      v[1] * m.d1Phi1, v[2] * m.d1Phi1])
        return cls(w=w, d1Phi1=np.broadcast_to(m.d1Phi1, w.shape[1:]), x1=m.x1,
                   vR=v[1:3, 0], vRplus=v[1:3, -1])


def transport_sources(f: np.ndarray, g1: np.ndarray, g4: np.ndarray,
                      Hhat: np.ndarray, m: MetricPack):
    """Sources (F_H, Q, Qplus) built from interior data f and boundary data g1, g4."""
    fN = f[4] - f[5] * m.d2psi - f[6] * m.d3psi
    fH = np.stack([fN, f[5] * m.d1Phi1, f[6] * m.d1Phi1])
    FH = (d1(fH[0], m.x1) + d2(fH[1]) + d3(fH[2])) / m.d1Phi1
    Q = d2(Hhat[1, 0] * g1) + d3(Hhat[2, 0] * g1) - fN[0]
    Qp = d2(Hhat[1, -1] * g4) + d3(Hhat[2, -1] * g4) + f[4, -1]
    return FH, Q, Qp


def _transport_rhs(r: TransportResiduals, c: TransportCoefficients, src, t):
    FH, Q, Qp = (s(t) if callable(s) else s for s in src)
    a = r.a
    w = c.w
    divw = d1(w[0], c.x1) + d2(w[1]) + d3(w[2])
    da = (w[0] * d1(a, c.x1) + w[1] * d2(a) + w[2] * d3(a) + a * divw) / c.d1Phi1
    dR = d2(c.vR[0] * r.R) + d3(c.vR[1] * r.R)
    dRp = d2(c.vRplus[0] * r.Rplus) + d3(c.vRplus[1] * r.Rplus)
    return np.asarray(FH) - da, np.asarray(Q) - dR, np.asarray(Qp) - dRp


def evolve_transport_residuals(r: TransportResiduals, c: TransportCoefficients,
                               sources=(0.0, 0.0, 0.0), dt: float = 0.0,
                               t: float = 0.0, tol: float = 1e-8) -> TransportResiduals:
    """One RK4 step of the three residual transport laws."""
    leak = max(float(np.max(np.abs(c.w[0][0]))), float(np.max(np.abs(c.w[0][-1]))))
    if leak > tol:
        raise BoundaryTransportLeak(f"boundary normal transport velocity {leak:.3g} > {tol:.3g}")

    def f(y, s):
        ra = TransportResiduals(*y)
        return _transport_rhs(ra, c, sources, s)

    y = (r.a, r.R, r.Rplus)

    def axpy(base, k, h):
        return tuple(b + h * kk for b, kk in zip(base, k))

    k1 = f(y, t)
    k2 = f(axpy(y, k1, 0.5 * dt), t + 0.5 * dt)
    k3 = f(axpy(y, k2, 0.5 * dt), t + 0.5 * dt)
    k4 = f(axpy(y, k3, dt), t + dt)
    out = tuple(b + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
                for b, a1, a2, a3, a4 in zip(y, k1, k2, k3, k4))
    return TransportResiduals(*out)
