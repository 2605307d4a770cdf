import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from brokenray.field import (FourierField, RadialProfile, eval_field, phantom, polar_samples, project,
                             rotate_coefficients, rotate_field, single_harmonic, uniform_grid)
from helpers import random_field


def direct_sum(field, r, theta):
    # independent order: per-profile interpolation, then accumulate by harmonic
    out = field.profile("a", 0)(r)
    for k in range(1, field.K + 1):
        out = out + field.profile("a", k)(r) * np.cos(k * theta)
        out = out + field.profile("b", k)(r) * np.sin(k * theta)
    return out


def test_constant_field():
    g = uniform_grid(64)
    f = FourierField(g, np.full((1, 65), 2.5), np.zeros((0, 65)))
    assert eval_field(f, 0.3, 1.0) == pytest.approx(2.5, abs=1e-15)


def test_first_harmonic():
    g = uniform_grid(64)
    f = single_harmonic(g, 1, lambda r: r)
    assert eval_field(f, 0.37, 0.0) == pytest.approx(0.37, abs=1e-14)
    assert eval_field(f, 0.37, math.pi / 2) == pytest.approx(0.0, abs=1e-14)


def test_eval_matches_direct_sum():
    rng = np.random.default_rng(5)
    f = random_field(rng, 7)
    r = rng.uniform(0, 1, 10_000)
    th = rng.uniform(-10, 10, 10_000)
    np.testing.assert_allclose(f.eval(r, th), direct_sum(f, r, th), atol=1e-12, rtol=0)


def test_eval_domain():
    f = phantom("uniform", uniform_grid(32))
    with pytest.raises(ValueError):
        eval_field(f, 1.2, 0.0)


def test_origin_constraint():
    g = uniform_grid(32)
    with pytest.raises(ValueError):
        FourierField(g, np.ones((2, 33)), np.zeros((1, 33)))


def test_profile_interpolates_nodes():
    g = uniform_grid(40)
    vals = np.sin(5 * g) + g**3
    p = RadialProfile(g, vals)
    np.testing.assert_allclose(p(g), vals, atol=1e-15, rtol=0)
    back = RadialProfile.from_csv(p.to_csv())
    np.testing.assert_array_equal(back.values, vals)


def test_grid_validation():
    with pytest.raises(ValueError):
        RadialProfile(np.linspace(0, 1, 10), np.zeros(10))
    with pytest.raises(ValueError):
        RadialProfile(np.linspace(0, 1, 33) ** 2, np.zeros(33))


def test_project_examples():
    g = uniform_grid(64)
    th = 2 * math.pi * np.arange(20) / 20
    f = project((g**2)[:, None] * np.cos(3 * th)[None, :], 4, g)
    np.testing.assert_allclose(f.a[3], g**2, atol=1e-12)
    others = np.delete(np.vstack((f.a, f.b)), 3, axis=0)
    assert np.max(np.abs(others)) <= 1e-12
    ones = project(np.ones((65, 20)), 4, g)
    np.testing.assert_allclose(ones.a[0], 1.0, atol=1e-14)
    with pytest.raises(ValueError):
        project(np.ones((65, 19)), 4, g)


@given(seed=st.integers(0, 2**32 - 1), K=st.integers(0, 10))
def test_project_round_trip(seed, K):
    f = random_field(np.random.default_rng(seed), K, uniform_grid(32))
    back = project(polar_samples(f, 4 * K + 4), K, f.grid)
    np.testing.assert_allclose(back.a, f.a, atol=1e-10)
    np.testing.assert_allclose(back.b, f.b, atol=1e-10)


def test_phantom_catalog():
    g = uniform_grid(128)
    u = phantom("uniform", g)
    assert np.all(u.eval(np.linspace(0, 1, 7), np.linspace(0, 6, 7)) == 1.0)
    anti = phantom("antisym", g)
    r = np.linspace(0, 1, 50)
    th = np.linspace(-4, 4, 50)
    np.testing.assert_allclose(anti.eval(r, th), -anti.eval(r, -th), atol=1e-15)
    blob = phantom("offcenter-K8", g)
    assert blob.K == 8
    back = project(polar_samples(blob, 64), 8, g)
    np.testing.assert_allclose(back.a, blob.a, atol=1e-10)
    np.testing.assert_allclose(back.b, blob.b, atol=1e-10)
    ring = phantom("ring", g)
    assert np.argmax(ring.a[0]) == round(0.6 * 128)
    with pytest.raises(ValueError):
        phantom("nope", g)


def test_offcenter_is_truncated_gaussian():
    # the K=8 truncation of the blob stays close to the full Gaussian
    g = uniform_grid(128)
    f = phantom("offcenter-K8", g)
    x, y = np.meshgrid(np.linspace(-0.7, 0.7, 15), np.linspace(-0.7, 0.7, 15))
    exact = np.exp(-((x - 0.45 * math.cos(0.3)) ** 2 + (y - 0.45 * math.sin(0.3)) ** 2) / 0.09)
    assert np.max(np.abs(f.eval_xy(x, y) - exact)) < 5e-3


def test_periodicity_exact():
    f = random_field(np.random.default_rng(2), 6)
    r = np.linspace(0, 1, 40)
    th = np.linspace(0, 1, 40)
    assert np.max(np.abs(f.eval(r, th) - f.eval(r, th + 2 * math.pi))) <= 1e-14


@given(seed=st.integers(0, 2**32 - 1), phi=st.floats(-7, 7))
def test_rotation_consistency(seed, phi):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 6, uniform_grid(32))
    r = rng.uniform(0, 1, 200)
    th = rng.uniform(-4, 4, 200)
    np.testing.assert_allclose(rotate_coefficients(f, phi).eval(r, th), f.eval(r, th + phi), atol=1e-12)
    np.testing.assert_allclose(rotate_field(f, phi).eval(r, th), f.eval(r, th - phi), atol=1e-12)


def test_field_json_round_trip():
    f = random_field(np.random.default_rng(3), 3)
    back = FourierField.from_json(f.to_json())
    np.testing.assert_array_equal(back.a, f.a)
    np.testing.assert_array_equal(back.b, f.b)
    assert back.K == 3
