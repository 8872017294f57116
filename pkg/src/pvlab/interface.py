"""Boundary operator, stability margin and the coupled plasma-vacuum step."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import torus_hs_norm
from .constraints import constraint_residuals
from .exceptions import CflViolated, StabilityViolated, StepRejected
from .geometry import (DEFAULT_EPS0, SlabGrid, SlabMetric, TorusGrid, d2, d3,
                       front_metric, integrate)
from .plasma import IH, IQ, IV, Eos, cfl_dt, impose_bc, plasma_rhs, pressure
from .vacuum_elliptic import DivCurlData, nu_cross, solve_divcurl


# ---------------------------------------------------------------------------
# Surface current on the outer wall
# ---------------------------------------------------------------------------

class SurfaceCurrent:
    """Tangential current on x1 = -1, constant or linearly interpolated in time."""

    def __init__(self, values: np.ndarray, times: np.ndarray | None = None):
        values = np.asarray(values, dtype=float)
        if times is None:
            values = values[None]
            times = np.array([0.0])
        times = np.asarray(times, dtype=float)
        if values.shape[0] != times.size or values.shape[1] != 3:
            raise ValueError("surface current must have shape (nt, 3, n2, n3)")
        if np.any(np.diff(times) <= 0):
            raise ValueError("surface current sample times must increase")
        if np.max(np.abs(values[:, 0])) > 1e-12 * (1.0 + np.max(np.abs(values))):
            raise ValueError("surface current must be tangential (zero normal component)")
        self.times = times
        self.values = values

    @classmethod
    def constant(cls, value) -> "SurfaceCurrent":
        return cls(np.asarray(value, dtype=float))

    @classmethod
    def from_file(cls, path: str) -> "SurfaceCurrent":
        if not os.path.exists(path):
            raise FileNotFoundError(f"surface current file not found: {path}")
        with np.load(path) as f:
            return cls(f["values"], f["times"])

    def _locate(self, t):
        if self.times.size == 1:
            return 0, 0, 0.0
        t = min(max(t, self.times[0]), self.times[-1])
        i = int(np.clip(np.searchsorted(self.times, t) - 1, 0, self.times.size - 2))
        s = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return i, i + 1, s

    def __call__(self, t: float) -> np.ndarray:
        i, j, s = self._locate(t)
        return (1.0 - s) * self.values[i] + s * self.values[j]

    def derivative(self, t: float, order: int) -> np.ndarray:
        if order == 0:
            return self(t)
        if order > 1 or self.times.size == 1:
            return np.zeros_like(self.values[0])
        i, j, _ = self._locate(t)
        return (self.values[j] - self.values[i]) / (self.times[j] - self.times[i])


@dataclass
class InterfaceBC:
    q_bc: np.ndarray
    jext: SurfaceCurrent
    delta0: float = 0.5


# ---------------------------------------------------------------------------
# Boundary operator and margin
# ---------------------------------------------------------------------------

def front_normal_velocity(U: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """v_N = v1 - v2 d2phi - v3 d3phi on x1 = 0."""
    return U[1, 0] - U[2, 0] * d2(phi) - U[3, 0] * d3(phi)


def boundary_operator(U, Hcal, phi, dphi_dt, jext) -> tuple:
    """Residuals (dphi/dt - v_N, [q], Hcal_N, v1 on the wall, nu x Hcal - J)."""
    Hs = Hcal[:, -1]
    r1 = dphi_dt - front_normal_velocity(U, phi)
    r2 = U[IQ, 0] - 0.5 * np.sum(Hs ** 2, axis=0)
    r3 = Hs[0] - Hs[1] * d2(phi) - Hs[2] * d3(phi)
    r4 = U[1, -1]
    r5 = nu_cross(Hcal[:, 0]) - np.asarray(jext)
    return r1, r2, r3, r4, r5


def stability_margin(U, Hcal, strict_delta0: float | None = None):
    """(min, field) of |H2 Hcal3 - H3 Hcal2| on x1 = 0."""
    H = U[IH][:, 0]
    Hs = Hcal[:, -1]
    f = np.abs(H[1] * Hs[2] - H[2] * Hs[1])
    mn = float(np.min(f))
    if strict_delta0 is not None and mn < strict_delta0:
        raise StabilityViolated(f"stability margin {mn:.4g} < {strict_delta0:.4g}")
    return mn, f


# ---------------------------------------------------------------------------
# Coupled step
# ---------------------------------------------------------------------------

@dataclass
class CoupledConfig:
    slab: SlabGrid
    torus: TorusGrid
    jext: SurfaceCurrent
    eos: Eos = field(default_factory=Eos)
    delta0: float = 0.5
    eps0: float = DEFAULT_EPS0
    cfl_number: float = 1.0
    rtol: float = 1e-10
    strict: bool = False


@dataclass
class CoupledState:
    U: np.ndarray
    Hcal: np.ndarray
    phi: np.ndarray
    t: float = 0.0


@dataclass
class StageData:
    U: np.ndarray
    vN: np.ndarray
    kU: np.ndarray
    metric: SlabMetric
    Hcal: np.ndarray
    Hfrak: np.ndarray
    residuals: dict


def _stage(U, phi, t, cfg: CoupledConfig, rhs: bool = True) -> StageData:
    vN = front_normal_velocity(U, phi)
    metric = front_metric(phi, cfg.slab, cfg.torus, vN, cfg.eps0)
    n2, n3 = cfg.torus.n2, cfg.torus.n3
    data = DivCurlData.zeros(cfg.slab.n1m, n2, n3)
    data = replace(data, g5=cfg.jext(t))
    sol = solve_divcurl(data, metric.vacuum, rtol=cfg.rtol, compat_tol=None)
    qb = 0.5 * np.sum(sol.Hcal[:, -1] ** 2, axis=0)
    U = impose_bc(U, qb)
    kU = plasma_rhs(U, metric.plasma, cfg.eos) if rhs else None
    return StageData(U, vN, kU, metric, sol.Hcal, sol.Hfrak, sol.residuals)


def initial_vacuum(state: CoupledState, cfg: CoupledConfig) -> CoupledState:
    """Replace Hcal by the elliptic solve and impose the boundary values on U."""
    st = _stage(state.U, state.phi, state.t, cfg, rhs=False)
    return CoupledState(st.U, st.Hcal, state.phi.copy(), state.t)


def coupled_cfl(state: CoupledState, cfg: CoupledConfig) -> float:
    vN = front_normal_velocity(state.U, state.phi)
    metric = front_metric(state.phi, cfg.slab, cfg.torus, vN, cfg.eps0)
    return cfl_dt(state.U, metric.plasma, cfg.torus, cfg.eos)


def coupled_step(state: CoupledState, dt: float, cfg: CoupledConfig):
    """Advance (U, Hcal, phi) by one RK4 step; returns (state, diagnostics)."""
    s1 = _stage(state.U, state.phi, state.t, cfg)
    lim = cfg.cfl_number * cfl_dt(s1.U, s1.metric.plasma, cfg.torus, cfg.eos)
    if abs(dt) > lim * (1 + 1e-12):
        raise CflViolated(f"dt = {dt:.4g} exceeds the CFL cap {lim:.4g}")
    U0, p0, t = s1.U, state.phi, state.t
    s2 = _stage(U0 + 0.5 * dt * s1.kU, p0 + 0.5 * dt * s1.vN, t + 0.5 * dt, cfg)
    s3 = _stage(U0 + 0.5 * dt * s2.kU, p0 + 0.5 * dt * s2.vN, t + 0.5 * dt, cfg)
    s4 = _stage(U0 + dt * s3.kU, p0 + dt * s3.vN, t + dt, cfg)
    U1 = U0 + dt / 6.0 * (s1.kU + 2 * s2.kU + 2 * s3.kU + s4.kU)
    p1 = p0 + dt / 6.0 * (s1.vN + 2 * s2.vN + 2 * s3.vN + s4.vN)
    fin = _stage(U1, p1, t + dt, cfg, rhs=False)
    new = CoupledState(fin.U, fin.Hcal, p1, t + dt)
    margin, _ = stability_margin(new.U, new.Hcal)
    if cfg.strict and margin < cfg.delta0:
        raise StabilityViolated(f"stability margin {margin:.4g} < {cfg.delta0:.4g}")
    if margin < 0.5 * cfg.delta0:
        raise StepRejected(f"stability margin {margin:.4g} fell below delta0/2")
    return new, diagnostics(new, fin, cfg)


def total_energy(U, Hcal, metric: SlabMetric, eos: Eos) -> float:
    p = pressure(U)
    rho = (p * np.exp(-U[7])) ** (1.0 / eos.gamma)
    ep = 0.5 * rho * np.sum(U[IV] ** 2, axis=0) + p / (eos.gamma - 1.0) + 0.5 * np.sum(U[IH] ** 2, axis=0)
    ev = 0.5 * np.sum(Hcal ** 2, axis=0)
    return float(integrate(ep * metric.plasma.d1Phi1, metric.plasma.x1)
                 + integrate(ev * metric.vacuum.d1Phi1, metric.vacuum.x1))


def diagnostics(state: CoupledState, st: StageData, cfg: CoupledConfig) -> dict:
    cr = constraint_residuals(state.U, st.metric.plasma)
    margin, _ = stability_margin(state.U, state.Hcal)
    return {
        "t": state.t,
        "energy": total_energy(state.U, state.Hcal, st.metric, cfg.eos),
        "div_h_max": float(np.max(np.abs(cr.div_h))),
        "HN_trace_max": float(np.max(np.abs(cr.HN_trace))),
        "margin_min": margin,
        "front_Hs_norms": torus_hs_norm(state.phi, 2.5),
        "elliptic_residuals": max(st.residuals["normal_trace"], st.residuals["tangential_trace"]),
    }
