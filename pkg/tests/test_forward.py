import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brokenray.abel import abel_forward_at
from brokenray.field import FourierField, phantom, rotate_field, single_harmonic, uniform_grid
from brokenray.forward import (Sinogram, brt_analytic, brt_numeric, degeneracy_distance, is_near_degenerate,
                               resolve_threads, s_coefficient, s_coefficients, s_sum_check, simulate)
from brokenray.geometry import TomographySet, enumerate_symmetric_rays, make_ray, rotate_ray
from helpers import random_field, random_ray, raster_sup

G = uniform_grid(128)
TRIANGLE = make_ray(3, 1, 0.0, 0.0)


def field_from(a, b):
    K = max(list(a) + list(b))
    A = np.zeros((K + 1, len(G)))
    B = np.zeros((K, len(G)))
    for k, fn in a.items():
        A[k] = fn(G)
    for k, fn in b.items():
        B[k - 1] = fn(G)
    return FourierField(G, A, B)


def test_s_examples():
    assert s_coefficient(0, TRIANGLE) == 3.0
    assert s_coefficient(3, TRIANGLE) == -3.0
    assert s_coefficient(1, TRIANGLE) == pytest.approx(0.0, abs=1e-15)
    diameter = make_ray(2, 1, 0.0, 0.0)
    np.testing.assert_allclose(s_coefficients(diameter, 4), [2, 0, -2, 0, 2], atol=1e-15)


def test_s_matches_textbook_ratio():
    ray = make_ray(7, 3, 0.4, 1.1)
    for k in range(1, 10):
        ratio = math.sin(k * (ray.kappa - ray.iota) / 2) / math.sin(k * ray.alpha / 2)
        assert s_coefficient(k, ray) == pytest.approx(ratio, rel=1e-12)


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(0, 64))
def test_s_identities(seed, k):
    ray = random_ray(np.random.default_rng(seed), n_max=200, angle=30.0)
    rc, rs = s_sum_check(k, ray)
    assert max(rc, rs) <= 1e-9 * ray.n
    assert abs(s_coefficient(k, ray)) <= ray.n * (1 + 1e-12)


@given(n=st.integers(1, 200), m=st.integers(-50, 50), iota=st.floats(-20, 20), k=st.integers(1, 64))
def test_s_identities_closed(n, m, iota, k):
    if 2 * abs(m) > n or (m == 0 and n > 1) or 2 * m == n or (n == 1):
        return
    ray = make_ray(n, m, iota, iota)
    rc, rs = s_sum_check(k, ray)
    assert max(rc, rs) <= 1e-9 * n


def test_near_degenerate_flag():
    ray = make_ray(3, 1, 0.0, 3e-8)
    assert 0 < degeneracy_distance(3, ray) < 1e-6
    assert is_near_degenerate(ray, 3)
    assert not is_near_degenerate(ray, 2)
    assert not is_near_degenerate(TRIANGLE, 12)
    rc, rs = s_sum_check(3, ray)
    assert max(rc, rs) <= 1e-12


def test_constant_field():
    f = phantom("uniform", G)
    rng = np.random.default_rng(0)
    for _ in range(20):
        ray = random_ray(rng)
        assert brt_analytic(f, ray) == pytest.approx(1.0, abs=1e-12)
        assert brt_numeric(f, ray) == pytest.approx(1.0, abs=1e-12)


def test_frozen_means():
    # reference values from 40-digit quadrature along the polylines
    f = field_from({0: lambda r: r**2 / 2, 2: lambda r: r**2 / 2}, {1: lambda r: r / 2})
    assert brt_analytic(f, TRIANGLE) == pytest.approx(0.25, abs=1e-12)
    assert brt_numeric(f, TRIANGLE) == pytest.approx(0.25, abs=1e-12)
    g = field_from({0: lambda r: 0 * r, 2: lambda r: r**2}, {2: lambda r: r**2 / 2})
    ray = make_ray(5, 1, 0.3, 0.9)
    want = 0.044042815780721773243
    assert brt_analytic(g, ray) == pytest.approx(want, abs=1e-12)
    assert brt_numeric(g, ray) == pytest.approx(want, abs=1e-12)


def test_radial_field_sees_only_the_average():
    f = single_harmonic(G, 0, lambda r: np.cos(3 * r))
    rng = np.random.default_rng(1)
    for _ in range(10):
        ray = random_ray(rng)
        want = abel_forward_at(0, f.profile("a", 0), [ray.z])[0] / ray.d
        assert brt_analytic(f, ray) == pytest.approx(want, abs=1e-12)


@given(seed=st.integers(0, 2**32 - 1))
def test_analytic_matches_numeric(seed):
    rng = np.random.default_rng(seed)
    f = random_field(rng, int(rng.integers(0, 13)), G)
    ray = random_ray(rng)
    num = brt_numeric(f, ray)
    ana = brt_analytic(f, ray)
    assert abs(ana - num) <= 1e-6 * max(abs(num), 1e-3 * raster_sup(f))


def test_raw_and_normalized():
    f = random_field(np.random.default_rng(3), 4, G)
    ray = make_ray(6, 1, 0.2, -0.4)
    raw = brt_analytic(f, ray, normalized=False)
    assert raw == pytest.approx(brt_analytic(f, ray) * ray.n * ray.d, rel=1e-14)
    assert brt_numeric(f, ray, normalized=False) == pytest.approx(raw, rel=1e-9)
    with pytest.raises(ValueError):
        brt_numeric(f, ray, samples_per_segment=8)


@pytest.mark.parametrize("k", [1, 2, 5, 7])
def test_closed_orbit_annihilation(k):
    f = single_harmonic(G, k, lambda r: r**k * np.exp(-r))
    for n in (3, 4, 6, 9, 11):
        for m in range(1, (n + 1) // 2):
            if math.gcd(n, m) != 1 or k % n == 0:
                continue
            ray = make_ray(n, m, 0.7, 0.7)
            assert abs(brt_analytic(f, ray)) <= 1e-8
            assert abs(brt_numeric(f, ray)) <= 1e-8


def test_closed_orbit_multiple_survives():
    f = single_harmonic(G, 6, lambda r: r**6)
    ray = make_ray(3, 1, 0.0, 0.0)
    assert abs(brt_analytic(f, ray)) > 1e-3


def test_retraced_orbit_has_same_mean():
    f = random_field(np.random.default_rng(8), 6, G)
    once = make_ray(5, 2, 0.3, 0.3)
    twice = make_ray(10, 4, 0.3, 0.3)
    assert brt_analytic(f, twice) == pytest.approx(brt_analytic(f, once), abs=1e-13)


def test_antisymmetric_field_on_symmetric_rays():
    f = phantom("antisym", G)
    E = TomographySet.from_intervals([(-0.25, 0.25)])
    for z in (0.1, 0.37, 0.8):
        for ray in enumerate_symmetric_rays(E, 0.0, z, 60):
            assert abs(brt_analytic(f, ray)) <= 1e-8


@given(seed=st.integers(0, 2**32 - 1), phi=st.floats(-7, 7))
def test_rotation_identity(seed, phi):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 6, G)
    ray = random_ray(rng)
    lhs = brt_analytic(rotate_field(f, phi), ray)
    rhs = brt_analytic(f, rotate_ray(ray, -phi))
    assert abs(lhs - rhs) <= 1e-10


@given(seed=st.integers(0, 2**32 - 1))
def test_mean_bounded_by_sup(seed):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 5, G)
    ray = random_ray(rng)
    bound = raster_sup(f, 512) * (1 + 1e-3)
    assert abs(brt_analytic(f, ray)) <= bound


def test_simulate_deterministic_and_threads():
    f = random_field(np.random.default_rng(2), 5, G)
    rng = np.random.default_rng(11)
    rays = [random_ray(rng) for _ in range(50)]
    a = simulate(f, rays, sigma=1e-3, seed=7)
    b = simulate(random_field(np.random.default_rng(2), 5, G), rays, sigma=1e-3, seed=7, threads=4)
    assert a.to_json() == b.to_json()
    c = simulate(f, rays, sigma=1e-3, seed=8)
    assert a.to_json() != c.to_json()
    assert len(a) == 50 and a.seed == 7 and a.sigma == 1e-3


def test_noise_statistics():
    f = phantom("uniform", G)
    rng = np.random.default_rng(5)
    rays = [random_ray(rng) for _ in range(10_000)]
    vals = simulate(f, rays, sigma=1e-3, seed=1).values - 1.0
    assert abs(np.std(vals) / 1e-3 - 1) < 0.1
    assert abs(np.mean(vals)) < 1e-4


def test_numeric_fallback():
    f = random_field(np.random.default_rng(4), 6, G)
    rays = [random_ray(np.random.default_rng(i)) for i in range(5)]
    ana = simulate(f, rays).values
    num = simulate(f, rays, analytic_max_K=3).values
    np.testing.assert_allclose(num, ana, atol=1e-9)


def test_flagged_rays_recorded():
    f = random_field(np.random.default_rng(4), 4, G)
    rays = [TRIANGLE, make_ray(3, 1, 0.0, 3e-8)]
    assert simulate(f, rays).flagged == [1]


def test_sinogram_serialization():
    f = random_field(np.random.default_rng(6), 3, G)
    rng = np.random.default_rng(6)
    s = simulate(f, [random_ray(rng) for _ in range(8)], sigma=0.01, seed=3)
    back = Sinogram.from_json(s.to_json())
    assert back.to_json() == s.to_json()
    np.testing.assert_array_equal(back.values, s.values)
    raw = s.as_raw()
    np.testing.assert_allclose(raw.as_normalized().values, s.values, rtol=1e-15)
    lines = s.to_csv().splitlines()
    assert lines[0] == "n,m,alpha,iota,kappa,z,value" and len(lines) == 9
    assert float(lines[1].split(",")[-1]) == s.values[0]
    assert len(s.lookup()) == 8


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("BRT_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("BRT_THREADS")
    assert resolve_threads() == 1
