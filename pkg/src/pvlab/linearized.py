"""Good-unknown substitution, effective linearized operators and the Frechet harness.

The state of the nonlinear problem is x = (U, U_t, Hcal, phi, phi_t).  The
nonlinear operators are

    P(x)  = A0(U) U_t + Atilde1(U, Psi) d1U + A2(U) d2U + A3(U) d3U
    V(x)  = (curl Hfrak, div hfrak)
    B(x)  = (phi_t - v_N, q - |Hcal|^2/2, Hcal_N, v1 on the wall, nu x Hcal)

and their exact discrete derivatives are assembled from the effective
operators plus the zeroth-order front terms they drop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (SlabGrid, SlabMetric, TorusGrid, curl, d1, d2, d3, div,
                       extend_modewise, frak_H, front_metric, normal_part)
from .plasma import (Eos, apply_A0, apply_Aj, apply_Atilde1, derivatives,
                     straightened_operator)
from .vacuum_elliptic import nu_cross

_CSTEP = 1e-30


@dataclass
class BasicState:
    U: np.ndarray
    Hcal: np.ndarray
    phi: np.ndarray
    slab: SlabGrid
    torus: TorusGrid
    Ut: np.ndarray | None = None
    dphi_dt: np.ndarray | None = None
    eos: Eos = field(default_factory=Eos)

    def __post_init__(self):
        if self.Ut is None:
            self.Ut = np.zeros_like(self.U)
        if self.dphi_dt is None:
            self.dphi_dt = np.zeros_like(self.phi)
        self.metric: SlabMetric = front_metric(self.phi, self.slab, self.torus, self.dphi_dt)

    @property
    def mp(self):
        return self.metric.plasma

    @property
    def mv(self):
        return self.metric.vacuum


@dataclass
class GoodUnknown:
    Udot: np.ndarray
    Hdot: np.ndarray


def lift(basic: BasicState, g: np.ndarray) -> np.ndarray:
    return extend_modewise(g, basic.slab, basic.torus)


def _lift_grad(basic: BasicState, g: np.ndarray) -> np.ndarray:
    """Gradient of the lifting, with d1 taken on the union grid like the metric."""
    P = lift(basic, g)
    return np.stack([d1(P, basic.slab.x1), d2(P), d3(P)])


def _split(basic: BasicState, f: np.ndarray):
    i0 = basic.slab.i0
    return f[..., i0:, :, :], f[..., : i0 + 1, :, :]


def good_unknown(dU, dH, dPsi, basic: BasicState) -> GoodUnknown:
    """Udot = dU - (dPsi/d1Phi1) d1U, likewise for the vacuum field."""
    Pp, Pv = _split(basic, dPsi)
    Udot = dU - Pp / basic.mp.d1Phi1 * d1(basic.U, basic.mp.x1)
    Hdot = dH - Pv / basic.mv.d1Phi1 * d1(basic.Hcal, basic.mv.x1)
    return GoodUnknown(Udot, Hdot)


def good_unknown_inverse(g: GoodUnknown, dPsi, basic: BasicState):
    Pp, Pv = _split(basic, dPsi)
    dU = g.Udot + Pp / basic.mp.d1Phi1 * d1(basic.U, basic.mp.x1)
    dH = g.Hdot + Pv / basic.mv.d1Phi1 * d1(basic.Hcal, basic.mv.x1)
    return dU, dH


# ---------------------------------------------------------------------------
# Effective operators
# ---------------------------------------------------------------------------

def zeroth_order_C(Y, basic: BasicState) -> np.ndarray:
    """C Y = sum over alpha of (Y . grad_U A_alpha) d_alpha Uhat, by complex step."""
    U = basic.U + 1j * _CSTEP * Y
    dU = derivatives(basic.U, basic.mp.x1)
    eos = basic.eos
    out = (apply_A0(U, basic.Ut, eos) + apply_Atilde1(U, basic.mp, dU[0], eos)
           + apply_Aj(U, 2, dU[1], eos) + apply_Aj(U, 3, dU[2], eos))
    return out.imag / _CSTEP


def frozen_operator(Y, Yt, basic: BasicState) -> np.ndarray:
    """P(Uhat, Psihat) applied to a perturbation: A0 Y_t + Atilde1 d1Y + A2 d2Y + A3 d3Y."""
    U, m, eos = basic.U, basic.mp, basic.eos
    dY = derivatives(Y, m.x1)
    return (apply_A0(U, Yt, eos) + apply_Atilde1(U, m, dY[0], eos)
            + apply_Aj(U, 2, dY[1], eos) + apply_Aj(U, 3, dY[2], eos))


def vacuum_operator(Hcal, m) -> np.ndarray:
    """(curl Hfrak, div hfrak) stacked as four components."""
    Hf = frak_H(Hcal, m)
    hf = np.stack([normal_part(Hcal, m), Hcal[1] * m.d1Phi1, Hcal[2] * m.d1Phi1])
    return np.concatenate([curl(Hf, m.x1), div(hf, m.x1)[None]])


def apply_linearized_interior(Udot, Udot_t, Hdot, basic: BasicState):
    """(P'_e Udot, V'_e Hdot) with P'_e = P + C and V'_e = V(., Psihat)."""
    Pe = frozen_operator(Udot, Udot_t, basic) + zeroth_order_C(Udot, basic)
    return Pe, vacuum_operator(Hdot, basic.mv)


def apply_linearized_boundary(Udot, Hdot, dphi, dphi_t, basic: BasicState):
    """The five rows of the effective linearized boundary operator."""
    U, H = basic.U, basic.Hcal
    phi = basic.phi
    vhat = U[1:4]
    vN_hat = vhat[0] - vhat[1] * d2(phi) - vhat[2] * d3(phi)
    # d1 of v_N as a field on the plasma grid, read at x1 = 0
    mp = basic.mp
    vN_field = vhat[0] - vhat[1] * mp.d2psi - vhat[2] * mp.d3psi
    d1vN = d1(vN_field, mp.x1)[0]
    vdot_N = Udot[1, 0] - Udot[2, 0] * d2(phi) - Udot[3, 0] * d3(phi)
    r1 = dphi_t + vhat[1, 0] * d2(dphi) + vhat[2, 0] * d3(dphi) - vdot_N - dphi * d1vN
    Hs = H[:, -1]
    jump_d1q = d1(U[0], mp.x1)[0] - np.sum(Hs * d1(H, basic.mv.x1)[:, -1], axis=0)
    r2 = Udot[0, 0] - np.sum(Hs * Hdot[:, -1], axis=0) + jump_d1q * dphi
    HdotN = Hdot[0, -1] - Hdot[1, -1] * d2(phi) - Hdot[2, -1] * d3(phi)
    r3 = HdotN - d2(Hs[1] * dphi) - d3(Hs[2] * dphi)
    r4 = Udot[1, -1]
    r5 = nu_cross(Hdot[:, 0])
    return r1, r2, r3, r4, r5


# ---------------------------------------------------------------------------
# Nonlinear operators and their exact derivatives
# ---------------------------------------------------------------------------

@dataclass
class Direction:
    dU: np.ndarray
    dUt: np.ndarray
    dH: np.ndarray
    dphi: np.ndarray
    dphi_t: np.ndarray


def _metric_at(basic: BasicState, phi, phi_t):
    return front_metric(phi, basic.slab, basic.torus, phi_t, check=False)


def nonlinear_P(basic: BasicState, h: Direction, s: float) -> np.ndarray:
    m = _metric_at(basic, basic.phi + s * h.dphi, basic.dphi_dt + s * h.dphi_t)
    return straightened_operator(basic.U + s * h.dU, basic.Ut + s * h.dUt, m.plasma, basic.eos)


def nonlinear_V(basic: BasicState, h: Direction, s: float) -> np.ndarray:
    m = _metric_at(basic, basic.phi + s * h.dphi, basic.dphi_dt + s * h.dphi_t)
    return vacuum_operator(basic.Hcal + s * h.dH, m.vacuum)


def nonlinear_B(basic: BasicState, h: Direction, s: float, jext=None) -> np.ndarray:
    from .interface import boundary_operator

    U = basic.U + s * h.dU
    H = basic.Hcal + s * h.dH
    phi = basic.phi + s * h.dphi
    phit = basic.dphi_dt + s * h.dphi_t
    jext = np.zeros((3,) + phi.shape) if jext is None else jext
    r = boundary_operator(U, H, phi, phit, jext)
    return np.concatenate([r[0][None], r[1][None], r[2][None], r[3][None], r[4]])


def derivative_P(basic: BasicState, h: Direction) -> np.ndarray:
    """P'_e applied to the raw perturbation plus the dropped front terms."""
    Pe = frozen_operator(h.dU, h.dUt, basic) + zeroth_order_C(h.dU, basic)
    g, _ = _split(basic, _lift_grad(basic, h.dphi))
    dPsit, _ = _split(basic, lift(basic, h.dphi_t))
    m, U, eos = basic.mp, basic.U, basic.eos
    D = d1(U, m.x1)
    front = (apply_A0(U, D, eos) * dPsit + apply_Atilde1(U, m, D, eos) * g[0]
             + apply_Aj(U, 2, D, eos) * g[1] + apply_Aj(U, 3, D, eos) * g[2])
    return Pe - front / m.d1Phi1


def derivative_V(basic: BasicState, h: Direction) -> np.ndarray:
    m = basic.mv
    _, g = _split(basic, _lift_grad(basic, h.dphi))
    H = basic.Hcal
    dHf = frak_H(h.dH, m) + H[0] * g
    dhf = (np.stack([normal_part(h.dH, m), h.dH[1] * m.d1Phi1, h.dH[2] * m.d1Phi1])
           + np.stack([-H[1] * g[1] - H[2] * g[2], H[1] * g[0], H[2] * g[0]]))
    return np.concatenate([curl(dHf, m.x1), div(dhf, m.x1)[None]])


def derivative_B(basic: BasicState, h: Direction) -> np.ndarray:
    U, H, phi = basic.U, basic.Hcal, basic.phi
    dU, dH, dphi = h.dU, h.dH, h.dphi
    dvN = (dU[1, 0] - dU[2, 0] * d2(phi) - dU[3, 0] * d3(phi)
           - U[2, 0] * d2(dphi) - U[3, 0] * d3(dphi))
    Hs = H[:, -1]
    r1 = h.dphi_t - dvN
    r2 = dU[0, 0] - np.sum(Hs * dH[:, -1], axis=0)
    r3 = (dH[0, -1] - dH[1, -1] * d2(phi) - dH[2, -1] * d3(phi)
          - Hs[1] * d2(dphi) - Hs[2] * d3(dphi))
    r4 = dU[1, -1]
    r5 = nu_cross(dH[:, 0])
    return np.concatenate([r1[None], r2[None], r3[None], r4[None], r5])


@dataclass
class FrechetReport:
    eps: list
    errors: dict
    ratios: dict
    scales: dict

    def as_dict(self):
        return {"eps": self.eps, "errors": self.errors, "ratios": self.ratios,
                "scales": self.scales}


def frechet_verify(basic: BasicState, h: Direction, eps=(1e-2, 1e-3)) -> FrechetReport:
    """Central-difference remainders of P, V and B against their exact derivatives."""
    ops = {
        "P": (nonlinear_P, derivative_P),
        "V": (nonlinear_V, derivative_V),
        "B": (nonlinear_B, derivative_B),
    }
    errors, ratios, scales = {}, {}, {}
    for name, (N, dN) in ops.items():
        lin = dN(basic, h)
        scales[name] = float(np.max(np.abs(lin)))
        errs = []
        for e in eps:
            cd = (N(basic, h, e) - N(basic, h, -e)) / (2 * e)
            errs.append(float(np.max(np.abs(cd - lin))))
        errors[name] = errs
        ratios[name] = [errs[i] / errs[i + 1] if errs[i + 1] > 0 else float("inf")
                        for i in range(len(errs) - 1)]
    return FrechetReport(list(eps), errors, ratios, scales)
