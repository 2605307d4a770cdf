"""Band-limited functions on the unit disk.

A field is stored as radial profiles of its angular Fourier coefficients,

    f(r, theta) = a_0(r) + sum_k a_k(r) cos(k theta) + b_k(r) sin(k theta),

each profile sampled on a shared uniform grid over ``[0, 1]``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ive

DEFAULT_N = 512
MIN_N = 16
ORIGIN_TOL = 1e-10


def uniform_grid(N: int = DEFAULT_N) -> np.ndarray:
    """Uniform radii ``0, 1/N, ..., 1``."""
    if N < MIN_N:
        raise ValueError(f"grid needs at least {MIN_N} intervals, got {N}")
    return np.linspace(0.0, 1.0, N + 1)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    N = len(grid) - 1
    if N < MIN_N:
        raise ValueError(f"grid needs at least {MIN_N} intervals, got {N}")
    if grid[0] != 0.0 or grid[-1] != 1.0:
        raise ValueError("grid must start at 0 and end at 1")
    if np.max(np.abs(np.diff(grid) - 1.0 / N)) > 1e-12:
        raise ValueError("grid must be uniform")
    return grid


class RadialProfile:
    """Samples on a uniform radial grid with cubic spline interpolation.

    The interpolant is the not-a-knot cubic spline, which is linear in the
    samples; quadrature rules built on it therefore become matrices.
    """

    def __init__(self, grid, values):
        self.grid = _check_grid(grid)
        self.values = np.array(values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("values and grid differ in length")
        self.grid.flags.writeable = False
        self.values.flags.writeable = False
        self._spline = CubicSpline(self.grid, self.values)

    @property
    def N(self) -> int:
        return len(self.grid) - 1

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < -1e-14) or np.any(r > 1.0 + 1e-14):
            raise ValueError("radius outside [0, 1]")
        return self._spline(np.clip(r, 0.0, 1.0))

    @classmethod
    def from_function(cls, fn, grid=None):
        grid = uniform_grid() if grid is None else grid
        return cls(grid, fn(np.asarray(grid, dtype=float)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "value"])
        for r, v in zip(self.grid, self.values):
            w.writerow([f"{r:.17g}", f"{v:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RadialProfile":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        arr = np.array([[float(a), float(b)] for a, b in rows])
        return cls(arr[:, 0], arr[:, 1])


class FourierField:
    """Band-limited field with cosine profiles ``a[0..K]`` and sine profiles ``b[1..K]``.

    Parameters
    ----------
    grid : array_like
        Shared uniform radial grid.
    a : array_like, shape (K+1, N+1)
        Cosine coefficient samples.
    b : array_like, shape (K, N+1)
        Sine coefficient samples.
    """

    def __init__(self, grid, a, b):
        self.grid = _check_grid(grid)
        a = np.atleast_2d(np.array(a, dtype=float))
        b = np.array(b, dtype=float).reshape(-1, len(self.grid))
        if a.shape[1] != len(self.grid):
            raise ValueError("cosine profiles do not match the grid")
        if b.shape[0] != a.shape[0] - 1:
            raise ValueError("need exactly K sine profiles for K+1 cosine profiles")
        if a.shape[0] > 1:
            worst = max(np.max(np.abs(a[1:, 0])), np.max(np.abs(b[:, 0])))
            if worst > ORIGIN_TOL:
                raise ValueError(f"harmonics k >= 1 must vanish at r = 0 (found {worst:.3e})")
        self.a, self.b = a, b
        self.a.flags.writeable = False
        self.b.flags.writeable = False
        self.grid.flags.writeable = False
        # one spline through all 2K+1 profiles: columns a_0..a_K, b_1..b_K
        self._spline = CubicSpline(self.grid, np.vstack((a, b)).T)
        self._abel_cache: Dict[float, tuple] = {}

    @property
    def K(self) -> int:
        return self.a.shape[0] - 1

    @property
    def N(self) -> int:
        return len(self.grid) - 1

    def profile(self, kind: str, k: int) -> RadialProfile:
        """Coefficient profile ``a_k`` (``kind='a'``) or ``b_k`` (``kind='b'``)."""
        if kind == "a":
            return RadialProfile(self.grid, self.a[k])
        if kind == "b":
            if k < 1:
                raise ValueError("sine profiles start at k = 1")
            return RadialProfile(self.grid, self.b[k - 1])
        raise ValueError(f"unknown profile kind {kind!r}")

    def coefficients_at(self, r):
        """Interpolated ``(a, b)`` at radii ``r``; shapes ``(..., K+1)`` and ``(..., K)``."""
        r = np.asarray(r, dtype=float)
        if np.any(r < -1e-14) or np.any(r > 1.0 + 1e-14):
            raise ValueError("radius outside [0, 1]")
        vals = self._spline(np.clip(r, 0.0, 1.0))
        return vals[..., : self.K + 1], vals[..., self.K + 1 :]

    def eval(self, r, theta):
        """Evaluate the field at polar points (broadcasting)."""
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        ca, cb = self.coefficients_at(r)
        k = np.arange(self.K + 1)
        kt = theta[..., None] * k
        out = np.sum(ca * np.cos(kt), axis=-1)
        if self.K:
            out = out + np.sum(cb * np.sin(kt[..., 1:]), axis=-1)
        return out if out.ndim else float(out)

    def eval_xy(self, x, y):
        return self.eval(np.hypot(x, y), np.arctan2(y, x))

    def sup_bound(self) -> float:
        """Upper bound on ``sup |f|`` from the triangle inequality on the node values."""
        return float(np.max(np.abs(self.a).sum(axis=0) + np.abs(self.b).sum(axis=0)))

    def to_dict(self) -> dict:
        return {"K": self.K, "grid": self.grid.tolist(), "a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, rec: dict) -> "FourierField":
        field = cls(rec["grid"], rec["a"], np.array(rec["b"], dtype=float).reshape(-1, len(rec["grid"])))
        if field.K != int(rec["K"]):
            raise ValueError(f"K={rec['K']} disagrees with {field.K + 1} cosine profiles")
        return field

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "FourierField":
        return cls.from_dict(json.loads(text))


def eval_field(field: FourierField, r, theta):
    """Pointwise value ``a_0(r) + sum_k a_k(r) cos k theta + b_k(r) sin k theta``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0.0) or np.any(r_arr > 1.0):
        raise ValueError("radius outside [0, 1]")
    return field.eval(r, theta)


def project(samples, K: int, grid=None) -> FourierField:
    """Discrete angular Fourier projection of polar samples.

    Parameters
    ----------
    samples : array_like, shape (N+1, M)
        ``f(grid[i], 2*pi*j/M)``.
    K : int
        Band limit of the result.
    grid : array_like, optional
        Radii of the rows; defaults to the uniform grid with ``N`` intervals.
    """
    samples = np.asarray(samples, dtype=float)
    grid = uniform_grid(samples.shape[0] - 1) if grid is None else np.asarray(grid, float)
    M = samples.shape[1]
    if M < 4 * K + 4:
        raise ValueError(f"need at least {4 * K + 4} angular samples for K={K}, got {M}")
    spectrum = np.fft.rfft(samples, axis=1) / M
    a = np.empty((K + 1, len(grid)))
    b = np.empty((K, len(grid)))
    a[0] = spectrum[:, 0].real
    a[1:] = 2.0 * spectrum[:, 1 : K + 1].real.T
    b[:] = -2.0 * spectrum[:, 1 : K + 1].imag.T
    if K:
        # the origin is a single point; its angular variation is roundoff
        a[1:, 0] = 0.0
        b[:, 0] = 0.0
    return FourierField(grid, a, b)


def polar_samples(field: FourierField, M: int) -> np.ndarray:
    """Field values on ``grid x {2*pi*j/M}``."""
    theta = 2.0 * math.pi * np.arange(M) / M
    return field.eval(field.grid[:, None], theta[None, :])


def rotate_coefficients(field: FourierField, phi: float) -> FourierField:
    """Coefficients of ``(r, theta) -> f(r, theta + phi)``.

    Uses ``a_k cos k phi + b_k sin k phi`` and ``-a_k sin k phi + b_k cos k phi``.
    """
    k = np.arange(field.K + 1)[:, None]
    c, s = np.cos(k * phi), np.sin(k * phi)
    a = field.a.copy()
    b = field.b.copy()
    a[1:] = field.a[1:] * c[1:] + field.b * s[1:]
    b[:] = -field.a[1:] * s[1:] + field.b * c[1:]
    return FourierField(field.grid, a, b)


def rotate_field(field: FourierField, phi: float) -> FourierField:
    """Field rotated counterclockwise by ``phi``, i.e. ``f(r, theta - phi)``."""
    return rotate_coefficients(field, -phi)


# ---------------------------------------------------------------- phantoms

def _bump(r, center, width):
    return np.exp(-(((r - center) / width) ** 2))


def _blob_harmonics(grid, K, rc, thc, s, amp=1.0):
    # angular harmonics of amp*exp(-|x - xc|^2 / s^2), xc = rc*(cos thc, sin thc)
    env = amp * np.exp(-((grid - rc) ** 2) / s**2)
    x = 2.0 * grid * rc / s**2
    a = np.empty((K + 1, len(grid)))
    b = np.empty((K, len(grid)))
    a[0] = env * ive(0, x)
    for k in range(1, K + 1):
        ik = 2.0 * env * ive(k, x)
        a[k] = ik * math.cos(k * thc)
        b[k - 1] = ik * math.sin(k * thc)
    return a, b


RING_CENTER = 0.6
RING_WIDTH = 0.12
RING_RIPPLE = tuple(range(4, 41, 4))
RING_PHASE = 0.3


def _phantom_uniform(grid):
    return np.ones((1, len(grid))), np.zeros((0, len(grid)))


def _phantom_ring(grid):
    # radial bump plus a weak angular ripple at orders 4, 8, ..., 40 so that
    # short closed orbits see a nonradial bias that long orbits annihilate
    K = RING_RIPPLE[-1]
    a = np.zeros((K + 1, len(grid)))
    b = np.zeros((K, len(grid)))
    bump = _bump(grid, RING_CENTER, RING_WIDTH)
    a[0] = bump
    for k in RING_RIPPLE:
        prof = 0.05 * bump * (grid / RING_CENTER) ** 2
        a[k] = prof * math.cos(k * RING_PHASE)
        b[k - 1] = prof * math.sin(k * RING_PHASE)
    return a, b


def _phantom_offcenter(grid):
    return _blob_harmonics(grid, 8, rc=0.45, thc=0.3, s=0.3)


def _phantom_antisym(grid):
    a = np.zeros((4, len(grid)))
    b = np.zeros((3, len(grid)))
    b[0] = grid * (1.0 - grid**2)
    b[1] = 0.5 * grid**2 * np.cos(2.0 * grid)
    b[2] = 0.25 * grid**3
    return a, b


PHANTOMS = {
    "uniform": _phantom_uniform,
    "ring": _phantom_ring,
    "offcenter-K8": _phantom_offcenter,
    "antisym": _phantom_antisym,
}


def phantom(name: str, grid=None) -> FourierField:
    """Deterministic test field.

    ``uniform``
        ``a_0 = 1``.
    ``ring``
        Gaussian bump in ``a_0`` centred at r = 0.6 with a small angular
        ripple ``cos(k (theta - 0.3))`` at orders 4, 8, ..., 40.
    ``offcenter-K8``
        Angular harmonics ``k <= 8`` of a Gaussian blob centred at
        ``0.45 (cos 0.3, sin 0.3)``.
    ``antisym``
        Sine terms only, so ``f(r, -theta) = -f(r, theta)``.
    """
    if name not in PHANTOMS:
        raise ValueError(f"unknown phantom {name!r}; choose from {sorted(PHANTOMS)}")
    grid = uniform_grid() if grid is None else _check_grid(grid)
    a, b = PHANTOMS[name](grid)
    return FourierField(grid, a, b)


def single_harmonic(grid, k: int, profile, kind: str = "a") -> FourierField:
    """Field whose only nonzero profile is ``a_k`` or ``b_k``."""
    grid = _check_grid(grid)
    a = np.zeros((max(k, 0) + 1, len(grid)))
    b = np.zeros((max(k, 0), len(grid)))
    vals = profile(grid) if callable(profile) else np.asarray(profile, float)
    if kind == "a":
        a[k] = vals
    else:
        b[k - 1] = vals
    return FourierField(grid, a, b)
