"""Weighted, conormal, anisotropic and fractional norms, and the smoothing family S_theta."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.fft import dct, idct

from .exceptions import OrderTooHighForGrid
from .geometry import d1, d2, d3, integrate

KINDS = ("weighted", "tan", "star", "torus")


# ---------------------------------------------------------------------------
# Conormal weight
# ---------------------------------------------------------------------------

def _smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 1)
    xi = x[inside]
    a = np.exp(-1.0 / xi)
    b = np.exp(-1.0 / (1.0 - xi))
    out[inside] = a / (a + b)
    out[x >= 1] = 1.0
    return out


def sigma(x1):
    """Conormal weight: x on [0, 1/4], 1 - x on [3/4, 1], smooth and positive between.

    Negative arguments are mirrored, so the same weight serves the vacuum side.
    """
    x = np.abs(np.asarray(x1, dtype=float))
    return x + (1.0 - 2.0 * x) * _smoothstep((x - 0.25) / 0.5)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormRequest:
    kind: str
    order: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}; expected one of {KINDS}")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.kind != "torus" and (self.order < 0 or int(self.order) != self.order):
            raise ValueError("slab norms take a nonnegative integer order")


def star_indices(m: int):
    """Multi-indices (alpha, k) with |alpha| + 2k <= m, alpha over (Z1, d2, d3)."""
    out = []
    for k in range(m // 2 + 1):
        for a in product(range(m + 1), repeat=3):
            if sum(a) + 2 * k <= m:
                out.append((a, k))
    return out


def tan_indices(m: int):
    return [(a, 0) for a in product(range(m + 1), repeat=3) if sum(a) <= m]


def full_indices(m: int):
    return [a for a in product(range(m + 1), repeat=3) if sum(a) <= m]


def _apply(u, x1, a, k, conormal: bool):
    w = sigma(x1)[:, None, None]
    for _ in range(k):
        u = d1(u, x1)
    for _ in range(a[0]):
        u = w * d1(u, x1) if conormal else d1(u, x1)
    for _ in range(a[1]):
        u = d2(u)
    for _ in range(a[2]):
        u = d3(u)
    return u


def _check_grid(shape, m):
    need = 2 * int(np.ceil(m)) + 3
    if min(shape) < need:
        raise OrderTooHighForGrid(f"order {m} needs at least {need} points per direction, grid {shape}")


def torus_hs_norm(f: np.ndarray, s: float) -> float:
    """(sum over k in Z^2 of (1 + |k|^2)^s |c_k|^2)^(1/2)."""
    n2, n3 = f.shape
    k2 = np.fft.fftfreq(n2, 1.0 / n2)[:, None]
    k3 = np.fft.fftfreq(n3, 1.0 / n3)[None, :]
    c = np.fft.fft2(f) / (n2 * n3)
    return float(np.sqrt(np.sum((1.0 + k2 ** 2 + k3 ** 2) ** s * np.abs(c) ** 2)))


def norm_eval(u: np.ndarray, req: NormRequest, x1: np.ndarray | None = None) -> float:
    """Quadrature value of the requested norm (not squared)."""
    u = np.asarray(u, dtype=float)
    if req.kind == "torus":
        if u.ndim != 2:
            raise ValueError("torus norms take a field on the 2-torus")
        if max(abs(req.order), 0) > 0:
            _check_grid(u.shape, 0)
        return torus_hs_norm(u, req.order)
    if x1 is None or u.ndim != 3:
        raise ValueError("slab norms need a (n1, n2, n3) field and its x1 grid")
    m = int(req.order)
    _check_grid(u.shape, m)
    g2 = req.gamma ** 2
    total = 0.0
    if req.kind == "weighted":
        for a in full_indices(m):
            total += g2 ** (m - sum(a)) * integrate(_apply(u, x1, a, 0, False) ** 2, x1)
    else:
        idx = star_indices(m) if req.kind == "star" else tan_indices(m)
        for a, k in idx:
            w = g2 ** (m - sum(a) - 2 * k)
            total += w * integrate(_apply(u, x1, a, k, True) ** 2, x1)
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# Smoothing operators
# ---------------------------------------------------------------------------

ROUNDOFF = 64 * np.finfo(float).eps


def symbol(r):
    """Smooth cutoff equal to 1 for r <= 1 and 0 for r >= 2."""
    return 1.0 - _smoothstep(np.asarray(r, dtype=float) - 1.0)


def _freq_torus(n2, n3):
    k2 = np.fft.fftfreq(n2, 1.0 / n2)[:, None]
    k3 = np.fft.fftfreq(n3, 1.0 / n3)[None, :]
    return k2, k3


def _passband_shortcut(u, c, s):
    """u itself or zero when the spectrum sits, up to roundoff, where the symbol is 1 or 0."""
    tol = ROUNDOFF * (np.max(np.abs(c)) + 1e-300)
    if np.all(np.abs(c[s < 1.0]) <= tol):
        return u.copy()
    if np.all(np.abs(c[s > 0.0]) <= tol):
        return np.zeros_like(u)
    return None


def smooth_Stheta(u: np.ndarray, theta: float, x1: np.ndarray | None = None) -> np.ndarray:
    """Spectral smoothing S_theta.

    Fourier in the torus directions and a cosine (even) extension in x1 when
    the field is three-dimensional.  When every coefficient outside the
    pass band is at roundoff level the input is returned unchanged.
    """
    if theta < 1:
        raise ValueError("theta must be >= 1")
    u = np.asarray(u, dtype=float)
    if u.ndim == 2:
        n2, n3 = u.shape
        k2, k3 = _freq_torus(n2, n3)
        c = np.fft.fft2(u)
        s = symbol(np.sqrt(k2 ** 2 + k3 ** 2) / theta)
        shortcut = _passband_shortcut(u, c, s)
        if shortcut is not None:
            return shortcut
        return np.real(np.fft.ifft2(s * c))
    if u.ndim != 3:
        raise ValueError("S_theta acts on torus or slab fields")
    n1, n2, n3 = u.shape
    length = 1.0 if x1 is None else float(x1[-1] - x1[0])
    k2, k3 = _freq_torus(n2, n3)
    m1 = np.arange(n1)[:, None, None] / (2.0 * length)
    c = np.fft.fft2(dct(u, type=1, axis=0), axes=(1, 2))
    s = symbol(np.sqrt(m1 ** 2 + k2[None] ** 2 + k3[None] ** 2) / theta)
    shortcut = _passband_shortcut(u, c, s)
    if shortcut is not None:
        return shortcut
    return idct(np.real(np.fft.ifft2(s * c, axes=(1, 2))), type=1, axis=0)


def critical_field(n: int, alpha: float, seed: int = 0) -> np.ndarray:
    """Random-phase torus field with |c_k|^2 = (1 + |k|^2)^(-alpha-1)."""
    rng = np.random.default_rng(seed)
    k2, k3 = _freq_torus(n, n)
    amp = (1.0 + k2 ** 2 + k3 ** 2) ** (-(alpha + 1.0) / 2.0)
    c = amp * np.exp(2j * np.pi * rng.random((n, n)))
    return np.real(np.fft.ifft2(c)) * n * n


@dataclass
class SweepResult:
    thetas: list
    pairs: list
    bounded: dict
    approx: dict
    rate: dict

    @staticmethod
    def spread(vals) -> float:
        v = np.asarray(vals)
        return float(np.max(v) / np.min(v))

    def worst_spread(self) -> float:
        s = [self.spread(v) for v in self.bounded.values()]
        s += [self.spread(v) for v in self.approx.values()]
        return max(s)

    def as_dict(self):
        return {"thetas": self.thetas, "bounded": self.bounded, "approx": self.approx,
                "rate": self.rate, "worst_spread": self.worst_spread()}


def smoothing_sweep(thetas=(4, 8, 16, 32), pairs=((1, 3), (2, 2), (3, 1)),
                    n: int = 256, seed: int = 0) -> SweepResult:
    """Empirical constants of the three smoothing estimates over theta.

    bounded: |S u|_beta / (theta^(beta-alpha)_+ |u|_alpha)
    approx:  |S u - u|_beta / (theta^(beta-alpha) |u|_alpha), beta <= alpha only
    rate:    |dS u/dtheta|_beta / (theta^(beta-alpha-1) |u|_alpha), central quotient
    """
    bounded, approx, rate = {}, {}, {}
    for a, b in pairs:
        u = critical_field(n, a, seed)
        na = torus_hs_norm(u, a)
        key = f"{a},{b}"
        bounded[key], rate[key] = [], []
        if b <= a:
            approx[key] = []
        for th in thetas:
            Su = smooth_Stheta(u, th)
            bounded[key].append(torus_hs_norm(Su, b) / (th ** max(b - a, 0) * na))
            if b <= a:
                approx[key].append(torus_hs_norm(Su - u, b) / (th ** (b - a) * na))
            dth = 1e-3 * th
            dS = (smooth_Stheta(u, th + dth) - smooth_Stheta(u, th - dth)) / (2 * dth)
            rate[key].append(torus_hs_norm(dS, b) / (th ** (b - a - 1) * na))
    return SweepResult(list(thetas), [list(p) for p in pairs], bounded, approx, rate)
