"""Grids, discrete derivatives, front lifting and the straightening metric.

Layout convention: scalar fields are arrays of shape (n1, n2, n3); vector
fields carry a leading component axis, (3, n1, n2, n3); matrix fields carry
two, (m, m, n1, n2, n3).  The normal coordinate x1 is always axis -3 and
the torus coordinates x2, x3 are axes -2 and -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateJacobian, FrontTooLarge

DEFAULT_EPS0 = 0.1


@dataclass(frozen=True)
class TorusGrid:
    """Uniform collocation grid on the unit 2-torus."""

    n2: int
    n3: int

    def __post_init__(self):
        for n in (self.n2, self.n3):
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"torus point counts must be even and >= 4, got {n}")

    @property
    def x2(self) -> np.ndarray:
        return np.arange(self.n2) / self.n2

    @property
    def x3(self) -> np.ndarray:
        return np.arange(self.n3) / self.n3

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x2, self.x3, indexing="ij")

    @property
    def k2(self) -> np.ndarray:
        """Integer wavenumbers along x2 in FFT order."""
        return np.fft.fftfreq(self.n2, 1.0 / self.n2)

    @property
    def k3(self) -> np.ndarray:
        return np.fft.fftfreq(self.n3, 1.0 / self.n3)

    def kmag(self) -> np.ndarray:
        """|k| for every (k2, k3) pair, shape (n2, n3)."""
        k2, k3 = np.meshgrid(self.k2, self.k3, indexing="ij")
        return np.sqrt(k2 ** 2 + k3 ** 2)


def _deriv_wavenumbers(n: int) -> np.ndarray:
    # angular wavenumbers for first derivatives; the Nyquist mode is zeroed
    k = 2.0 * np.pi * np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    return k


@dataclass(frozen=True)
class SlabGrid:
    """Uniform grids on [0, 1] (plasma) and [-1, 0] (vacuum) sharing x1 = 0."""

    n1p: int
    n1m: int

    def __post_init__(self):
        for n in (self.n1p, self.n1m):
            if int(n) != n or n < 5:
                raise ValueError(f"slab point counts must be >= 5, got {n}")

    @property
    def x1p(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n1p)

    @property
    def x1m(self) -> np.ndarray:
        return np.linspace(-1.0, 0.0, self.n1m)

    @property
    def h1p(self) -> float:
        return 1.0 / (self.n1p - 1)

    @property
    def h1m(self) -> float:
        return 1.0 / (self.n1m - 1)

    @property
    def x1(self) -> np.ndarray:
        """Union grid on [-1, 1]; the interface sits at index ``i0``."""
        return np.concatenate([self.x1m, self.x1p[1:]])

    @property
    def i0(self) -> int:
        return self.n1m - 1


# ---------------------------------------------------------------------------
# Discrete derivatives
# ---------------------------------------------------------------------------

def d1(f: np.ndarray, x1: np.ndarray) -> np.ndarray:
    """Second-order x1 derivative: centered inside, one-sided at both ends."""
    return np.gradient(f, x1, axis=-3, edge_order=2)


def dtan(f: np.ndarray, axis: int) -> np.ndarray:
    """Spectral derivative along x2 (axis=-2) or x3 (axis=-1)."""
    n = f.shape[axis]
    shape = [1] * f.ndim
    if np.isrealobj(f):
        k = np.abs(_deriv_wavenumbers(n)[: n // 2 + 1])
        shape[axis] = k.size
        F = np.fft.rfft(f, axis=axis)
        return np.fft.irfft(F * (1j * k).reshape(shape), n=n, axis=axis)
    k = _deriv_wavenumbers(n)
    shape[axis] = n
    F = np.fft.fft(f, axis=axis)
    return np.fft.ifft(F * (1j * k).reshape(shape), axis=axis)


def d2(f: np.ndarray) -> np.ndarray:
    return dtan(f, -2)


def d3(f: np.ndarray) -> np.ndarray:
    return dtan(f, -1)


def grad(f: np.ndarray, x1: np.ndarray) -> np.ndarray:
    return np.stack([d1(f, x1), d2(f), d3(f)])


def div(F: np.ndarray, x1: np.ndarray) -> np.ndarray:
    return d1(F[0], x1) + d2(F[1]) + d3(F[2])


def curl(F: np.ndarray, x1: np.ndarray) -> np.ndarray:
    return np.stack([
        d2(F[2]) - d3(F[1]),
        d3(F[0]) - d1(F[2], x1),
        d1(F[1], x1) - d2(F[0]),
    ])


def trapezoid_weights(x1: np.ndarray) -> np.ndarray:
    h = np.diff(x1)
    w = np.zeros_like(x1)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def integrate(f: np.ndarray, x1: np.ndarray) -> complex | float:
    """Quadrature over the slab part: trapezoid in x1, mean over the torus."""
    w = trapezoid_weights(x1)
    return np.tensordot(w, f.mean(axis=(-2, -1)), axes=(0, -1))


# ---------------------------------------------------------------------------
# Front lifting
# ---------------------------------------------------------------------------

def bump(s: np.ndarray) -> np.ndarray:
    """Even smooth kernel with bump(0) = 1 and support in (-1/2, 1/2)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 0.5
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - 4.0 * s[inside] ** 2))
    return out


@dataclass(frozen=True)
class FrontField:
    phi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("front values must be finite")
        if np.max(np.abs(self.phi)) >= 1.0:
            raise FrontTooLarge("front height must satisfy max|phi| < 1")


@dataclass(frozen=True)
class LiftedFront:
    psi: np.ndarray
    dpsi_dt: np.ndarray
    slab: SlabGrid
    torus: TorusGrid

    def plasma(self, f: np.ndarray) -> np.ndarray:
        return f[..., self.slab.i0:, :, :]

    def vacuum(self, f: np.ndarray) -> np.ndarray:
        return f[..., : self.slab.i0 + 1, :, :]


def lift_multiplier(slab: SlabGrid, torus: TorusGrid, x1: np.ndarray | None = None) -> np.ndarray:
    """Mode-wise lifting factors bump(<k> x1), shape (n1, n2, n3)."""
    x1 = slab.x1 if x1 is None else x1
    bracket = np.sqrt(1.0 + torus.kmag() ** 2)
    return bump(x1[:, None, None] * bracket[None])


def extend_modewise(g: np.ndarray, slab: SlabGrid, torus: TorusGrid, x1: np.ndarray | None = None) -> np.ndarray:
    """Apply the lifting kernel to a torus function (linear, complex-safe)."""
    mult = lift_multiplier(slab, torus, x1)
    G = np.fft.fft2(g, axes=(-2, -1))
    out = np.fft.ifft2(G[..., None, :, :] * mult, axes=(-2, -1))
    return out.real if np.isrealobj(g) else out


def lift_front(phi, slab: SlabGrid, torus: TorusGrid, dphi_dt=None,
               eps0: float = DEFAULT_EPS0, check: bool = True) -> LiftedFront:
    """Lift a front on the torus to a function on the union slab grid."""
    phi = phi.phi if isinstance(phi, FrontField) else np.asarray(phi)
    if phi.shape != (torus.n2, torus.n3):
        raise ValueError(f"front shape {phi.shape} does not match torus grid")
    if check and np.max(np.abs(phi)) >= 0.5 * eps0:
        raise FrontTooLarge(
            f"max|phi| = {np.max(np.abs(phi)):.3g} exceeds the small-front cap {0.5 * eps0:.3g}")
    psi = extend_modewise(phi, slab, torus)
    if dphi_dt is None:
        dpsi = np.zeros_like(psi)
    else:
        dpsi = extend_modewise(np.asarray(dphi_dt), slab, torus)
    if check:
        x1 = slab.x1
        w1 = max(np.max(np.abs(psi)), np.max(np.abs(d1(psi, x1))),
                 np.max(np.abs(d2(psi))), np.max(np.abs(d3(psi))))
        if w1 > 0.5:
            raise FrontTooLarge(f"W^1,inf norm of the lifting is {w1:.3g} > 1/2")
    return LiftedFront(psi=psi, dpsi_dt=dpsi, slab=slab, torus=torus)


# ---------------------------------------------------------------------------
# Metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricPack:
    """Metric quantities of the straightening map on one x1 grid."""

    x1: np.ndarray
    psi: np.ndarray
    dpsi_dt: np.ndarray
    d1psi: np.ndarray
    d2psi: np.ndarray
    d3psi: np.ndarray
    d1Phi1: np.ndarray
    eta: np.ndarray = field(repr=False)
    Amat: np.ndarray = field(repr=False)

    @property
    def N(self) -> np.ndarray:
        return np.stack([np.ones_like(self.d2psi), -self.d2psi, -self.d3psi])

    def restrict(self, sl: slice, x1: np.ndarray) -> "MetricPack":
        def cut(a):
            return a[..., sl, :, :]
        return MetricPack(x1=x1, psi=cut(self.psi), dpsi_dt=cut(self.dpsi_dt),
                          d1psi=cut(self.d1psi), d2psi=cut(self.d2psi),
                          d3psi=cut(self.d3psi), d1Phi1=cut(self.d1Phi1),
                          eta=cut(self.eta), Amat=cut(self.Amat))


@dataclass(frozen=True)
class SlabMetric:
    """Metric on the union grid with plasma and vacuum views."""

    full: MetricPack
    plasma: MetricPack
    vacuum: MetricPack
    slab: SlabGrid
    torus: TorusGrid


def _metric_from_parts(x1, psi, dpsi, p1, p2, p3) -> MetricPack:
    J = 1.0 + p1
    one = np.ones_like(J)
    zero = np.zeros_like(J)
    eta = np.array([[one, -p2, -p3], [zero, J, zero], [zero, zero, J]])
    a11 = (1.0 + p2 ** 2 + p3 ** 2) / J
    A = np.array([[a11, -p2, -p3], [-p2, J, zero], [-p3, zero, J]])
    return MetricPack(x1=x1, psi=psi, dpsi_dt=dpsi, d1psi=p1, d2psi=p2, d3psi=p3,
                      d1Phi1=J, eta=eta, Amat=A)


def build_metric(lifted: LiftedFront, check: bool = True) -> SlabMetric:
    """Straightening metric: d1Phi1, eta and A = eta eta^T / d1Phi1."""
    slab, torus = lifted.slab, lifted.torus
    x1 = slab.x1
    psi = lifted.psi
    full = _metric_from_parts(x1, psi, lifted.dpsi_dt, d1(psi, x1), d2(psi), d3(psi))
    if check and np.min(np.real(full.d1Phi1)) < 0.5:
        raise DegenerateJacobian(
            f"min d1Phi1 = {np.min(np.real(full.d1Phi1)):.3g} < 1/2")
    i0 = slab.i0
    return SlabMetric(full=full,
                      plasma=full.restrict(slice(i0, None), slab.x1p),
                      vacuum=full.restrict(slice(None, i0 + 1), slab.x1m),
                      slab=slab, torus=torus)


def flat_metric(slab: SlabGrid, torus: TorusGrid) -> SlabMetric:
    z = np.zeros((slab.n1m + slab.n1p - 1, torus.n2, torus.n3))
    return build_metric(LiftedFront(z, z.copy(), slab, torus))


def front_metric(phi, slab: SlabGrid, torus: TorusGrid, dphi_dt=None,
                 eps0: float = DEFAULT_EPS0, check: bool = True) -> SlabMetric:
    return build_metric(lift_front(phi, slab, torus, dphi_dt, eps0, check), check)


# ---------------------------------------------------------------------------
# Straightened companions of vector fields
# ---------------------------------------------------------------------------

def normal_part(F: np.ndarray, m: MetricPack) -> np.ndarray:
    """F_N = F1 - F2 d2psi - F3 d3psi."""
    return F[0] - F[1] * m.d2psi - F[2] * m.d3psi


def eta_apply(F: np.ndarray, m: MetricPack) -> np.ndarray:
    """eta F = (F_N, F2 d1Phi1, F3 d1Phi1)."""
    return np.stack([normal_part(F, m), F[1] * m.d1Phi1, F[2] * m.d1Phi1])


def eta_inverse(G: np.ndarray, m: MetricPack) -> np.ndarray:
    F2 = G[1] / m.d1Phi1
    F3 = G[2] / m.d1Phi1
    return np.stack([G[0] + F2 * m.d2psi + F3 * m.d3psi, F2, F3])


def frak_H(F: np.ndarray, m: MetricPack) -> np.ndarray:
    """Straightened field (F1 d1Phi1, F1 d2psi + F2, F1 d3psi + F3)."""
    return np.stack([F[0] * m.d1Phi1, F[0] * m.d2psi + F[1], F[0] * m.d3psi + F[2]])


def frak_H_inverse(G: np.ndarray, m: MetricPack) -> np.ndarray:
    F1 = G[0] / m.d1Phi1
    return np.stack([F1, G[1] - F1 * m.d2psi, G[2] - F1 * m.d3psi])


def mat_vec(M: np.ndarray, F: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,j...->i...", M, F)
