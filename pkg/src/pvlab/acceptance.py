"""The thirteen acceptance checks, each returning a measured value and its threshold."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import NormRequest, norm_eval, smooth_Stheta, smoothing_sweep
from .constraints import (TransportCoefficients, constraint_residuals, TransportResiduals,
                          evolve_transport_residuals)
from .geometry import SlabGrid, TorusGrid, div, flat_metric, front_metric, mat_vec
from .init_compat import (InitialDataBundle, build_approximate_solution, check_compat_order,
                          derivative_cascade, fit_slope)
from .interface import coupled_cfl, coupled_step
from .linearized import BasicState, Direction, frechet_verify
from .plasma import assemble_symmetrizers, cartesian_operator, straightened_operator
from .scenarios import (equilibrium_current, equilibrium_plasma, equilibrium_state,
                        make_config, perturbed_plasma, perturbed_state, single_mode_vacuum)
from .vacuum_elliptic import (DivCurlData, helmholtz_decompose, nu_cross, solve_divcurl,
                              weighted_inner)
from .vacuum_reg import (RegBC, RegState, assemble_secondary, check_hyperbolicity,
                         epsilon_sweep, step_regularized)

ELLIPTIC = (3, 4, 5)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.number:2d} {self.name}: measured {self.measured:.4g}, "
                f"threshold {self.threshold:.4g}")

    def as_dict(self):
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "measured": float(self.measured), "threshold": float(self.threshold),
                "detail": _jsonable(self.detail)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _order(errs):
    return [float(np.log2(errs[i] / errs[i + 1])) for i in range(len(errs) - 1)]


def tilted_front(torus: TorusGrid, amp: float = 0.03) -> np.ndarray:
    X2, X3 = torus.mesh()
    return amp * np.sin(2 * np.pi * (X2 + X3))


def manufactured_gradient(m, torus: TorusGrid):
    """grad xi for xi = (x1 + 1)^2 x1 cos(2 pi x3) on the vacuum grid of m."""
    _, X3 = torus.mesh()
    x = m.x1[:, None, None]
    c, s = np.cos(2 * np.pi * X3)[None], np.sin(2 * np.pi * X3)[None]
    return np.stack([(3 * x ** 2 + 4 * x + 1) * c, 0 * x * c, -(x + 1) ** 2 * x * 2 * np.pi * s])


def manufactured_data(m, torus: TorusGrid):
    H = manufactured_gradient(m, torus)
    Ah = mat_vec(m.Amat, H)
    return DivCurlData(np.zeros_like(H), div(Ah, m.x1), Ah[0, -1], nu_cross(H[:, 0])), H


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------

def c01_symmetrizers(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    slab, tor = SlabGrid(5, 5), TorusGrid(8, 8)
    X2, X3 = tor.mesh()
    worst_sym, worst_eig = 0.0, np.inf
    for _ in range(50):
        shape = (slab.n1p, tor.n2, tor.n3)
        H = rng.uniform(-1, 1, (3,) + shape)
        p = rng.uniform(0.2, 2.0, shape)
        U = np.concatenate([(p + 0.5 * np.sum(H ** 2, axis=0))[None],
                            rng.uniform(-1, 1, (3,) + shape), H, rng.uniform(-1, 1, shape)[None]])
        phi = 0.02 * rng.uniform(-1, 1) * np.cos(2 * np.pi * (X2 + rng.integers(0, 2) * X3))
        m = front_metric(phi, slab, tor, 0.1 * rng.uniform(-1, 1) * np.sin(2 * np.pi * X3))
        S = assemble_symmetrizers(U, m.plasma)
        for A in (S.A0, S.A1, S.A2, S.A3, S.Atilde1):
            worst_sym = max(worst_sym, float(np.max(np.abs(A - np.swapaxes(A, 0, 1)))))
        A0 = np.moveaxis(S.A0.reshape(8, 8, -1), -1, 0)
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(A0)[:, 0].min()))
    ok = worst_sym <= 1e-12 and worst_eig > 0
    return CriterionResult(1, "symmetrizer suite", ok, worst_sym, 1e-12,
                           {"min_eig_A0": worst_eig, "states": 50})


def c02_flat_reduction(seed: int = 0) -> CriterionResult:
    slab, tor = SlabGrid(17, 17), TorusGrid(16, 16)
    rng = np.random.default_rng(seed)
    U = perturbed_plasma(slab, tor, 0.2)
    Ut = 0.1 * rng.standard_normal(U.shape)
    m = flat_metric(slab, tor).plasma
    err = float(np.max(np.abs(straightened_operator(U, Ut, m) - cartesian_operator(U, Ut, m.x1))))
    return CriterionResult(2, "flat reduction", err <= 1e-13, err, 1e-13)


def c03_vacuum_manufactured() -> CriterionResult:
    tor = TorusGrid(16, 16)
    phi = tilted_front(tor)
    errs = []
    for n in (17, 33, 65):
        m = front_metric(phi, SlabGrid(n, n), tor).vacuum
        data, H = manufactured_data(m, tor)
        errs.append(float(np.max(np.abs(solve_divcurl(data, m).Hfrak - H))))
    orders = _order(errs)
    slab = SlabGrid(65, 65)
    data, H = single_mode_vacuum(slab, tor)
    mode_err = float(np.max(np.abs(solve_divcurl(data, flat_metric(slab, tor).vacuum).Hcal - H)))
    ok = min(orders) >= 1.8 and mode_err <= 1e-8
    return CriterionResult(3, "vacuum manufactured solution", ok, min(orders), 1.8,
                           {"errors": errs, "orders": orders, "single_mode_error": mode_err,
                            "single_mode_threshold": 1e-8})


def c04_uniqueness() -> CriterionResult:
    slab, tor = SlabGrid(17, 17), TorusGrid(16, 16)
    m = front_metric(tilted_front(tor), slab, tor).vacuum
    sol = solve_divcurl(DivCurlData.zeros(slab.n1m, tor.n2, tor.n3), m)
    val = float(np.max(np.abs(sol.Hcal)))
    return CriterionResult(4, "uniqueness", val <= 1e-10, val, 1e-10)


def c05_helmholtz(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    x1 = np.linspace(-1.0, 0.0, 17)
    worst = 0.0
    for _ in range(20):
        v = rng.standard_normal((3, 17, 8, 8))
        a, g, _ = helmholtz_decompose(v, x1)
        rel = abs(weighted_inner(a, g, x1)) / np.sqrt(weighted_inner(a, a, x1) * weighted_inner(g, g, x1))
        worst = max(worst, float(rel))
    return CriterionResult(5, "Helmholtz orthogonality", worst <= 1e-10, worst, 1e-10)


def c06_constraint_propagation(steps: int = 100) -> CriterionResult:
    runs = []
    dt = None
    for n1 in (17, 33):
        slab, tor = SlabGrid(n1, n1), TorusGrid(8, 8)
        cfg = make_config(slab, tor)
        st = perturbed_state(cfg, 0.05)
        r0 = float(np.max(np.abs(constraint_residuals(st.U, flat_metric(slab, tor).plasma).div_h)))
        dt = 0.5 * coupled_cfl(st, cfg) if dt is None else 0.5 * dt
        worst = 0.0
        for _ in range(steps):
            st, d = coupled_step(st, dt, cfg)
            worst = max(worst, d["div_h_max"])
        dx = 1.0 / (n1 - 1)
        runs.append({"n1": n1, "dt": dt, "initial": r0, "div_h_max": worst,
                     "bound": 10 * (dt ** 2 + dx ** 2)})
    ratio = runs[0]["div_h_max"] / runs[1]["div_h_max"]
    ok = (all(r["initial"] <= 1e-12 and r["div_h_max"] <= r["bound"] for r in runs)
          and ratio >= 3.0)
    return CriterionResult(6, "constraint propagation", ok, ratio, 3.0, {"runs": runs})


def c07_transport(steps: int = 20) -> CriterionResult:
    slab, tor = SlabGrid(17, 17), TorusGrid(8, 8)
    m = flat_metric(slab, tor).plasma
    X2, X3 = tor.mesh()
    x1 = m.x1[:, None, None]
    v = np.stack([0.3 * np.sin(np.pi * x1) * np.cos(2 * np.pi * X2),
                  0.4 + 0 * x1 * X2, -0.2 + 0 * x1 * X2])
    coef = TransportCoefficients.from_basic(v, m)
    z = TransportResiduals(np.zeros(x1.shape[:1] + X2.shape), np.zeros(X2.shape), np.zeros(X2.shape))
    dt = 0.01
    r = z
    zero = 0.0
    for k in range(steps):
        r = evolve_transport_residuals(r, coef, dt=dt, t=k * dt)
        zero = max(zero, float(max(np.abs(r.a).max(), np.abs(r.R).max(), np.abs(r.Rplus).max())))
    # constant sources with a constant tangential velocity and no normal transport
    v0 = np.stack([0 * x1 * X2, 0.4 + 0 * x1 * X2, -0.2 + 0 * x1 * X2])
    coef0 = TransportCoefficients.from_basic(v0, m)
    c = 0.7
    r = z
    lin = 0.0
    for k in range(steps):
        r = evolve_transport_residuals(r, coef0, sources=(c, c, c), dt=dt, t=k * dt)
        t = (k + 1) * dt
        lin = max(lin, float(max(np.abs(r.a - c * t).max(), np.abs(r.R - c * t).max(),
                                 np.abs(r.Rplus - c * t).max())))
    ok = zero <= 1e-12 and lin <= 1e-10
    return CriterionResult(7, "transport residuals", ok, max(zero, lin), 1e-10,
                           {"zero_source_max": zero, "constant_source_error": lin})


def frechet_setup(seed: int = 1):
    slab, tor = SlabGrid(17, 17), TorusGrid(8, 8)
    X2, X3 = tor.mesh()
    U = perturbed_plasma(slab, tor, 0.2)
    x1p = slab.x1p[:, None, None]
    x1m = slab.x1m[:, None, None]
    Hc = np.stack([0.1 * np.sin(2 * np.pi * X2) * (1 + x1m),
                   np.sqrt(2) + 0.1 * x1m * np.cos(2 * np.pi * X3), 1 + 0 * x1m * X2])
    Ut = 0.1 * np.sin(np.pi * x1p) * np.cos(2 * np.pi * X3) * np.ones((8, 1, 1, 1))
    basic = BasicState(U, Hc, 0.01 * np.cos(2 * np.pi * X2), slab, tor, Ut=Ut,
                       dphi_dt=0.005 * np.sin(2 * np.pi * X3))
    rng = np.random.default_rng(seed)
    sm = np.sin(np.pi * x1p) * np.cos(2 * np.pi * (X2 + X3))
    h = Direction(sm * rng.standard_normal((8, 1, 1, 1)), sm * rng.standard_normal((8, 1, 1, 1)),
                  np.cos(np.pi * x1m) * np.sin(2 * np.pi * X2) * rng.standard_normal((3, 1, 1, 1)),
                  0.5 * np.cos(2 * np.pi * X3), 0.3 * np.sin(2 * np.pi * X2))
    return basic, h


def c08_frechet() -> CriterionResult:
    basic, h = frechet_setup()
    rep = frechet_verify(basic, h)
    ratios = {k: v[0] for k, v in rep.ratios.items()}
    within = {k: bool(25.0 <= r <= 400.0) for k, r in ratios.items()}
    # report the ratio farthest outside the band
    worst = max(ratios.values(), key=lambda r: abs(np.log(r / 100.0)))
    return CriterionResult(8, "Frechet checks", all(within.values()), worst, 25.0,
                           {"ratios": ratios, "within_band": within, "errors": rep.errors,
                            "band": [25.0, 400.0]})


def c09_smoothing() -> CriterionResult:
    n = 64
    rng = np.random.default_rng(3)
    k2 = np.fft.fftfreq(n, 1.0 / n)[:, None]
    k3 = np.fft.fftfreq(n, 1.0 / n)[None, :]
    C = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    C[np.sqrt(k2 ** 2 + k3 ** 2) > 8] = 0.0
    u = np.real(np.fft.ifft2(C))
    exact = bool(np.array_equal(smooth_Stheta(u, 8.0), u))
    sw = smoothing_sweep()
    spread = sw.worst_spread()
    return CriterionResult(9, "smoothing operators", exact and spread <= 4.0, spread, 4.0,
                           {"bit_exact": exact, **sw.as_dict()})


def c10_compatibility() -> CriterionResult:
    slab, tor = SlabGrid(33, 17), TorusGrid(8, 8)
    J = equilibrium_current(tor)
    b = InitialDataBundle(equilibrium_plasma(slab, tor), np.zeros((8, 8)), J, slab, tor)
    derivative_cascade(b, 2)
    jump = check_compat_order(b, 1).pressure_jump[0]
    b = InitialDataBundle(perturbed_plasma(slab, tor, 0.05), np.zeros((8, 8)), J, slab, tor)
    derivative_cascade(b, 2)
    ts = np.geomspace(1e-3, 1e-1, 6)
    a = build_approximate_solution(b, ts, J=1)
    slope = fit_slope(ts, a.fa_norms)
    ok = jump <= 1e-10 and slope >= 1.8
    return CriterionResult(10, "compatibility", ok, slope, 1.8,
                           {"equilibrium_pressure_jump": jump, "times": ts,
                            "fa_norms": a.fa_norms})


def c11_regularized() -> CriterionResult:
    slab, tor = SlabGrid(17, 17), TorusGrid(8, 8)
    X2, X3 = tor.mesh()
    phi = 0.02 * np.cos(2 * np.pi * X2)
    m = front_metric(phi, slab, tor).vacuum
    rng = np.random.default_rng(5)
    eig_err, signs = 0.0, True
    for eps in (0.1, 0.5, 2.0):
        vt = rng.uniform(-1, 1, (3, tor.n2, tor.n3))
        sy = assemble_secondary(m, vt, phi, eps)
        B0 = np.moveaxis(sy.B[0].reshape(6, 6, -1), -1, 0)
        nn = np.sqrt(np.sum(sy.nu ** 2, axis=0)).ravel()
        want = np.sort(np.stack([np.ones_like(nn)] * 2 + [1 - eps * nn] * 2 + [1 + eps * nn] * 2,
                                axis=1), axis=1)
        eig_err = max(eig_err, float(np.max(np.abs(np.linalg.eigvalsh(B0) - want))))
        signs = signs and check_hyperbolicity(sy).signs_agree
    # fluxes for fields satisfying the homogeneous wall condition
    H = rng.standard_normal((3,) + m.d1Phi1.shape)
    E = rng.standard_normal(H.shape)
    bc = RegBC(H_wall=np.zeros((2, tor.n2, tor.n3)))
    st = RegState(H, E, 0.1)
    U = perturbed_plasma(slab, tor, 0.05)
    st, flux = step_regularized(st, m, tor, bc, 1e-4, U_plasma=U)
    fl = max(abs(flux["J_plus"]), abs(flux["J_minus"]))
    sweep = epsilon_sweep(slab, tor, equilibrium_current(tor)(0.0), phi, T=0.1)
    ok = eig_err <= 1e-12 and signs and fl <= 1e-12 and sweep.monotone()
    return CriterionResult(11, "regularized vacuum", ok, eig_err, 1e-12,
                           {"signs_agree": signs, "flux_max": fl, "sweep": sweep.as_dict()})


def c12_norm_ordering(seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    n = 17
    x1 = np.linspace(0.0, 1.0, n)
    X1 = x1[:, None, None]
    X2, X3 = np.meshgrid(np.arange(8) / 8, np.arange(8) / 8, indexing="ij")
    worst_gap, eq_err = np.inf, 0.0
    for _ in range(20):
        u = np.zeros((n, 8, 8))
        for _ in range(4):
            a, k1, k2, k3 = rng.standard_normal(), *rng.integers(0, 3, 3)
            u += a * np.cos(np.pi * k1 * X1) * np.cos(2 * np.pi * (k2 * X2 + k3 * X3) + rng.random())
        for mo in (1, 2):
            t = norm_eval(u, NormRequest("tan", mo), x1)
            s = norm_eval(u, NormRequest("star", mo), x1)
            f = norm_eval(u, NormRequest("weighted", mo), x1)
            worst_gap = min(worst_gap, (s - t) / f, (f - s) / f)
            if mo == 1:
                eq_err = max(eq_err, abs(s - t) / s)
    ok = worst_gap >= -1e-14 and eq_err <= 1e-14
    return CriterionResult(12, "norm ordering", ok, worst_gap, 0.0, {"star_tan_equality": eq_err})


def c13_equilibrium(steps: int = 100) -> CriterionResult:
    slab, tor = SlabGrid(17, 17), TorusGrid(16, 16)
    cfg = make_config(slab, tor)
    st0 = equilibrium_state(cfg)
    st = st0
    dt = 0.5 * coupled_cfl(st, cfg)
    m_lo, m_hi = np.inf, -np.inf
    for _ in range(steps):
        st, d = coupled_step(st, dt, cfg)
        m_lo, m_hi = min(m_lo, d["margin_min"]), max(m_hi, d["margin_min"])
    drift = float(max(np.abs(st.U - st0.U).max(), np.abs(st.Hcal - st0.Hcal).max(),
                      np.abs(st.phi - st0.phi).max()))
    mdev = max(abs(m_lo - 1.0), abs(m_hi - 1.0))
    return CriterionResult(13, "equilibrium stationarity", drift <= 1e-8 and mdev <= 1e-8,
                           drift, 1e-8, {"margin_deviation": mdev, "steps": steps})


CRITERIA = {
    1: c01_symmetrizers, 2: c02_flat_reduction, 3: c03_vacuum_manufactured,
    4: c04_uniqueness, 5: c05_helmholtz, 6: c06_constraint_propagation,
    7: c07_transport, 8: c08_frechet, 9: c09_smoothing, 10: c10_compatibility,
    11: c11_regularized, 12: c12_norm_ordering, 13: c13_equilibrium,
}


def run_suite(only=None) -> list[CriterionResult]:
    """Run the selected criteria; an exception counts as a failure, not an abort."""
    out = []
    for k in sorted(only or CRITERIA):
        try:
            out.append(CRITERIA[k]())
        except Exception as e:  # reported, not raised
            out.append(CriterionResult(k, CRITERIA[k].__name__[4:], False, float("nan"),
                                       float("nan"), {"error": f"{type(e).__name__}: {e}"}))
    return out
