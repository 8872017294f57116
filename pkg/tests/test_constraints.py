import numpy as np
import pytest

from pvlab.constraints import (TransportCoefficients, TransportResiduals, constraint_residuals,
                               evolve_transport_residuals, straightened_h)
from pvlab.exceptions import BoundaryTransportLeak
from pvlab.geometry import SlabGrid, TorusGrid, curl, flat_metric, front_metric
from pvlab.scenarios import equilibrium_plasma

SLAB, TOR = SlabGrid(17, 17), TorusGrid(8, 8)


def with_H(H):
    U = equilibrium_plasma(SLAB, TOR)
    U[4:7] = np.asarray(H, dtype=float).reshape(3, *([1] * 3)) if np.ndim(H) == 1 else H
    return U


def test_constant_field_on_flat_metric():
    H = np.array([0.3, -0.2, 0.5])
    r = constraint_residuals(with_H(H), flat_metric(SLAB, TOR).plasma)
    # one-sided edge stencil weights do not sum to zero exactly in floating point
    assert np.max(np.abs(r.div_h)) <= 1e-15
    assert np.all(r.HN_trace == 0.3)
    assert np.all(r.H1_top == 0.3)


def test_tangent_field_has_zero_residuals():
    r = constraint_residuals(with_H([0.0, 1.0, 0.0]), flat_metric(SLAB, TOR).plasma)
    for f in (r.div_h, r.HN_trace, r.H1_top):
        assert np.all(f == 0.0)


def test_field_from_discrete_potential_is_divergence_free():
    """h = curl A with the plasma stencils, mapped back to H through the metric."""
    X2, X3 = TOR.mesh()
    m = front_metric(0.02 * np.cos(2 * np.pi * X2), SLAB, TOR).plasma
    x = m.x1[:, None, None]
    A = np.stack([x * np.sin(2 * np.pi * X3), np.sin(np.pi * x) * np.cos(2 * np.pi * (X2 + X3)),
                  (x ** 2) * np.cos(2 * np.pi * X2)])
    h = curl(A, m.x1)
    H2, H3 = h[1] / m.d1Phi1, h[2] / m.d1Phi1
    H = np.stack([h[0] + H2 * m.d2psi + H3 * m.d3psi, H2, H3])
    assert np.max(np.abs(straightened_h(H, m) - h)) < 1e-14
    r = constraint_residuals(with_H(H), m)
    assert np.max(np.abs(r.div_h)) < 1e-12 * np.max(np.abs(h))


def _zero(n1=17):
    return TransportResiduals(np.zeros((n1, 8, 8)), np.zeros((8, 8)), np.zeros((8, 8)))


def test_zero_data_stays_zero():
    m = flat_metric(SLAB, TOR).plasma
    x = m.x1[:, None, None]
    X2, _ = TOR.mesh()
    v = np.stack([0.3 * np.sin(np.pi * x) * np.cos(2 * np.pi * X2), 0.4 + 0 * x * X2, 0 * x * X2])
    c = TransportCoefficients.from_basic(v, m)
    r = _zero()
    for k in range(10):
        r = evolve_transport_residuals(r, c, dt=0.01, t=0.01 * k)
        assert np.all(r.a == 0) and np.all(r.R == 0) and np.all(r.Rplus == 0)


def test_constant_source_integrates_linearly():
    m = flat_metric(SLAB, TOR).plasma
    c = TransportCoefficients.from_basic(np.zeros((3, 17, 8, 8)), m)
    r = _zero()
    for k in range(10):
        r = evolve_transport_residuals(r, c, sources=(0.7, -0.2, 0.1), dt=0.01)
    assert np.max(np.abs(r.a - 0.07)) < 1e-14
    assert np.max(np.abs(r.R + 0.02)) < 1e-14
    assert np.max(np.abs(r.Rplus - 0.01)) < 1e-14


def test_normal_transport_at_boundary_is_rejected():
    m = flat_metric(SLAB, TOR).plasma
    v = np.zeros((3, 17, 8, 8))
    v[0] = 0.1
    with pytest.raises(BoundaryTransportLeak):
        evolve_transport_residuals(_zero(), TransportCoefficients.from_basic(v, m), dt=0.01)


def _characteristics(x, t, a0):
    """Exact solution of a_t + (w a)_x = 0 with w = 0.2 sin(pi x) on (0, 1)."""
    s = 0.2 * np.pi
    foot = 2 / np.pi * np.arctan(np.tan(np.pi * x / 2) * np.exp(-s * t))
    return a0(foot) * np.sin(np.pi * foot) / np.sin(np.pi * x)


def test_transport_matches_method_of_characteristics():
    T, errs = 0.5, []
    a0 = lambda x: 1.0 + 0.5 * np.cos(np.pi * x)  # noqa: E731
    for n1 in (33, 65, 129):
        x1 = np.linspace(0.0, 1.0, n1)
        w = np.zeros((3, n1, 4, 4))
        w[0] = 0.2 * np.sin(np.pi * x1)[:, None, None]
        c = TransportCoefficients(w, np.ones((n1, 4, 4)), x1, np.zeros((2, 4, 4)), np.zeros((2, 4, 4)))
        r = TransportResiduals(a0(x1)[:, None, None] * np.ones((1, 4, 4)),
                               np.zeros((4, 4)), np.zeros((4, 4)))
        steps = 100
        for _ in range(steps):
            r = evolve_transport_residuals(r, c, dt=T / steps)
        inner = slice(1, -1)
        exact = _characteristics(x1[inner], T, a0)
        errs.append(np.max(np.abs(r.a[inner, 0, 0] - exact)))
    errs = np.array(errs)
    assert errs[-1] < 1e-3
    assert np.all(errs[:-1] / errs[1:] > 3.0)
