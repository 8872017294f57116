import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pvlab.analysis import (NormRequest, norm_eval, sigma, smooth_Stheta, smoothing_sweep,
                            star_indices, tan_indices, torus_hs_norm)
from pvlab.exceptions import OrderTooHighForGrid

X1 = np.linspace(0.0, 1.0, 17)
G2, G3 = np.meshgrid(np.arange(8) / 8, np.arange(8) / 8, indexing="ij")


def cosine_field(r, terms=4):
    x = X1[:, None, None]
    u = np.zeros((X1.size, 8, 8))
    for _ in range(terms):
        a, k1, k2, k3 = r.standard_normal(), *r.integers(0, 3, 3)
        u += a * np.cos(np.pi * k1 * x) * np.cos(2 * np.pi * (k2 * G2 + k3 * G3) + r.random())
    return u


@pytest.mark.parametrize("kind", ["weighted", "tan", "star"])
def test_zero_field_has_zero_norm(kind):
    assert norm_eval(np.zeros((17, 8, 8)), NormRequest(kind, 2), X1) == 0.0


def test_zero_torus_field():
    assert norm_eval(np.zeros((8, 8)), NormRequest("torus", 1.5)) == 0.0


@pytest.mark.parametrize("s", [-1.0, 0.0, 0.5, 1.0, 2.5])
def test_single_harmonic_fractional_norm(s):
    """sin(2 pi x2): two modes |k| = 1 with |c|^2 = 1/4 each."""
    n = 16
    X2, _ = np.meshgrid(np.arange(n) / n, np.arange(n) / n, indexing="ij")
    want = np.sqrt(2 * 0.25 * 2.0 ** s)
    assert abs(norm_eval(np.sin(2 * np.pi * X2), NormRequest("torus", s)) - want) < 1e-14


def test_torus_norm_against_direct_fourier_sum(rng):
    n = 8
    f = rng.standard_normal((n, n))
    total = 0.0
    for a in range(-n // 2, n // 2):
        for b in range(-n // 2, n // 2):
            c = np.sum(f * np.exp(-2j * np.pi * (a * G2 + b * G3))) / n ** 2
            total += (1 + a * a + b * b) ** 0.7 * abs(c) ** 2
    assert abs(torus_hs_norm(f, 0.7) - np.sqrt(total)) < 1e-12


@given(seed=st.integers(0, 2 ** 16), m=st.sampled_from([1, 2]))
def test_norm_ordering_on_band_limited_fields(seed, m):
    u = cosine_field(np.random.default_rng(seed))
    t = norm_eval(u, NormRequest("tan", m), X1)
    s = norm_eval(u, NormRequest("star", m), X1)
    f = norm_eval(u, NormRequest("weighted", m), X1)
    assert t <= s * (1 + 1e-14) and s <= f * (1 + 1e-14)
    if m == 1:
        assert abs(s - t) <= 1e-14 * s


def test_anisotropic_index_set():
    for m in range(5):
        idx = star_indices(m)
        assert all(sum(a) + 2 * k <= m for a, k in idx)
        assert len(set(idx)) == len(idx)
        brute = [((a, b, c), k) for k in range(m + 1) for a in range(m + 1)
                 for b in range(m + 1) for c in range(m + 1) if a + b + c + 2 * k <= m]
        assert sorted(idx) == sorted(brute)
    assert star_indices(1) == tan_indices(1)


def test_gamma_weight_scales_lowest_order_term():
    u = np.ones((17, 8, 8))
    for kind in ("weighted", "tan", "star"):
        n1 = norm_eval(u, NormRequest(kind, 2), X1)
        n3 = norm_eval(u, NormRequest(kind, 2, gamma=3.0), X1)
        assert abs(n3 / n1 - 9.0) < 1e-12


def test_request_validation():
    with pytest.raises(ValueError):
        NormRequest("sobolev", 1)
    with pytest.raises(ValueError):
        NormRequest("tan", 1, gamma=0.5)
    with pytest.raises(ValueError):
        NormRequest("star", 1.5)


def test_order_too_high_for_grid():
    with pytest.raises(OrderTooHighForGrid):
        norm_eval(np.zeros((5, 5, 5)), NormRequest("weighted", 2), np.linspace(0, 1, 5))


def test_conormal_weight():
    x = np.linspace(0, 1, 401)
    s = sigma(x)
    lo, hi = x <= 0.25, x >= 0.75
    assert np.array_equal(s[lo], x[lo])
    assert np.max(np.abs(s[hi] - (1 - x[hi]))) < 1e-15
    assert np.all(s[1:-1] > 0)
    assert np.array_equal(sigma(-x), s)


# ---------------------------------------------------------------------------
# Smoothing family
# ---------------------------------------------------------------------------

def band_limited(n, kmax, seed=0):
    r = np.random.default_rng(seed)
    k2 = np.fft.fftfreq(n, 1.0 / n)[:, None]
    k3 = np.fft.fftfreq(n, 1.0 / n)[None, :]
    C = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    C[np.sqrt(k2 ** 2 + k3 ** 2) > kmax] = 0.0
    return np.real(np.fft.ifft2(C))


def test_band_limited_field_is_reproduced_bit_exactly():
    u = band_limited(64, 8)
    assert np.array_equal(smooth_Stheta(u, 8.0), u)


def test_high_harmonic_is_removed():
    n, th = 64, 6.0
    X2, X3 = np.meshgrid(np.arange(n) / n, np.arange(n) / n, indexing="ij")
    u = np.cos(2 * np.pi * 3 * th * X2)
    assert np.all(smooth_Stheta(u, th) == 0.0)
    u3 = np.cos(np.pi * 16 * X1)[:, None, None] * np.ones((1, 8, 8))
    assert np.all(smooth_Stheta(u3, 4.0, X1) == 0.0)


def test_slab_band_limited_field_is_reproduced():
    u = cosine_field(np.random.default_rng(2))
    assert np.array_equal(smooth_Stheta(u, 8.0, X1), u)


@given(seed=st.integers(0, 2 ** 16), t1=st.floats(1.0, 6.0))
def test_nested_smoothing(seed, t1):
    u = np.random.default_rng(seed).standard_normal((32, 32))
    once = smooth_Stheta(u, t1)
    assert np.max(np.abs(smooth_Stheta(once, 2 * t1) - once)) <= 1e-12 * np.max(np.abs(u))


@given(seed=st.integers(0, 2 ** 16), s2=st.integers(0, 31), s3=st.integers(0, 31))
def test_smoothing_commutes_with_translations(seed, s2, s3):
    u = np.random.default_rng(seed).standard_normal((32, 32))
    lhs = smooth_Stheta(np.roll(u, (s2, s3), axis=(0, 1)), 5.0)
    rhs = np.roll(smooth_Stheta(u, 5.0), (s2, s3), axis=(0, 1))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@given(seed=st.integers(0, 2 ** 16), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_smoothing_is_linear(seed, a, b):
    r = np.random.default_rng(seed)
    u, v = r.standard_normal((2, 32, 32))
    lhs = smooth_Stheta(a * u + b * v, 4.0)
    assert np.max(np.abs(lhs - a * smooth_Stheta(u, 4.0) - b * smooth_Stheta(v, 4.0))) <= 1e-12 * (1 + abs(a) + abs(b))


def test_smoothing_rejects_small_theta():
    with pytest.raises(ValueError):
        smooth_Stheta(np.zeros((8, 8)), 0.5)


def test_smoothing_sweep_constants_are_stable():
    sw = smoothing_sweep(n=128)
    assert sw.worst_spread() <= 4.0
    for vals in sw.rate.values():
        assert sw.spread(vals) <= 4.0
