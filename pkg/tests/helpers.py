"""Shared generators for the test-suite."""

import math

import numpy as np

from brokenray.field import FourierField, uniform_grid
from brokenray.geometry import InvalidRayError, make_ray


def smooth_profile(rng, grid, power):
    """``y**power`` times a random sum of a few low-frequency cosines."""
    g = np.zeros_like(grid)
    for _ in range(3):
        g += rng.normal() * np.cos(rng.uniform(0.0, 4.0) * grid + rng.uniform(0.0, math.pi))
    return grid**power * g


def random_field(rng, K, grid=None, scale=1.0):
    """Band-limited field whose harmonic ``k`` behaves like ``r**k`` at the origin."""
    grid = uniform_grid(128) if grid is None else grid
    a = np.zeros((K + 1, len(grid)))
    b = np.zeros((K, len(grid)))
    for k in range(K + 1):
        a[k] = scale * smooth_profile(rng, grid, k) / (1 + k)
        if k:
            b[k - 1] = scale * smooth_profile(rng, grid, k) / (1 + k)
    return FourierField(grid, a, b)


def random_ray(rng, n_max=64, angle=10.0):
    """Ray with random segment count, winding and unwrapped endpoints."""
    while True:
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(-n, n + 1))
        try:
            return make_ray(n, m, rng.uniform(-angle, angle), rng.uniform(-angle, angle))
        except InvalidRayError:
            continue


def raster_sup(field, n_theta=256):
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    return float(np.max(np.abs(field.eval(field.grid[:, None], theta[None, :]))))
