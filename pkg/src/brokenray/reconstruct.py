"""Recovering fields from broken ray data.

Two pipelines are provided.

* Singleton data (all rays start and end at one boundary point) determine
  the circular averages ``g(z)`` of the field, hence ``a_0`` through the
  zeroth Abel transform.  Long closed orbits of coprime type ``(n, m)`` only
  see harmonics divisible by ``n``, so their mean value converges to
  ``g(cos(pi m / n))``.
* Data on an open arc are fitted harmonic by harmonic: rays symmetric about
  an axis ``phi`` with common chord distance ``z`` give a linear system for
  ``c_k = cos(k phi) A_k a_k(z) + sin(k phi) A_k b_k(z)``; two axes separate
  the cosine and sine parts, and each ``A_k`` is inverted at the end.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from ._quad import composite_rule, refine
from .abel import abel_inverse
from .field import FourierField, RadialProfile, uniform_grid
from .forward import (Sinogram, _ray_key, brt_analytic, is_near_degenerate, resolve_threads,
                      s_coefficients)
from .geometry import BrokenRay, TomographySet, enumerate_symmetric_rays

DEFAULT_LAM_REL = 1e-8
Z_MAX_OPEN = 0.98


class ReconstructionError(RuntimeError):
    """Base class for failures of a reconstruction pipeline."""


class MissingDataError(ReconstructionError):
    """Raised when measurements for planned rays are absent."""


class RankDeficiencyError(ReconstructionError):
    """Raised when some ``(axis, z)`` system has too few usable rays."""

    def __init__(self, message, failures):
        super().__init__(message)
        self.failures = failures


class AxisChoiceError(ReconstructionError):
    """Raised when the two axes cannot separate cosine and sine parts."""


class ExtrapolationError(ReconstructionError):
    """Raised when the data stop too far from ``z = 1`` to extend safely."""


# ---------------------------------------------------------------- circular averages

def p_density(z: float, r) -> np.ndarray:
    """Density of the radius along a chord at distance ``z``.

    ``p_z(r) = ((1 - z^2) (1 - z^2/r^2))^(-1/2)`` for ``z < r <= 1``.
    """
    r = np.asarray(r, dtype=float)
    if not 0.0 < z < 1.0:
        raise ValueError(f"chord distance must lie in (0, 1), got {z}")
    if np.any(r <= z) or np.any(r > 1.0):
        raise ValueError("density is defined only for z < r <= 1")
    out = r / np.sqrt((1.0 - z) * (1.0 + z) * (r - z) * (r + z))
    return out if out.ndim else float(out)


def _chord_radius_rule(z, order=32):
    # r = sqrt(z^2 + s^2 (1 - z^2)) turns p_z(r) dr into ds on [0, 1]
    s, w = composite_rule(refine([0.0, 1.0], 0.25), order)
    return np.sqrt(z * z + s * s * (1.0 - z * z)), s, w


def p_normalization(z: float) -> float:
    """``int_z^1 p_z(r) dr`` by quadrature after the substitution in ``s``."""
    r, s, w = _chord_radius_rule(z)
    jac = s * (1.0 - z * z) / r
    return float(np.sum(w * p_density(z, r) * jac))


def radial_average(a0: RadialProfile, z: float) -> float:
    """``g(z) = int_z^1 p_z(r) a_0(r) dr``, the mean of ``a_0`` along a chord."""
    if z <= 0.0:
        s, w = composite_rule(refine([0.0, 1.0], 0.25))
        return float(np.sum(w * a0(s)))
    r, _, w = _chord_radius_rule(z)
    return float(np.sum(w * a0(r)))


# ---------------------------------------------------------------- singleton pipeline

@dataclass
class SingletonPlan:
    """Closed coprime orbits through ``point`` chosen near target chord distances."""

    point: float
    targets: np.ndarray
    rays: List[BrokenRay]
    n_min: int
    z_tol: float

    def to_dict(self) -> dict:
        return {
            "kind": "singleton",
            "point": self.point,
            "targets": list(map(float, self.targets)),
            "rays": [r.to_dict() for r in self.rays],
            "n_min": self.n_min,
            "z_tol": self.z_tol,
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "SingletonPlan":
        return cls(float(rec["point"]), np.array(rec["targets"], float),
                   [BrokenRay.from_dict(r) for r in rec["rays"]], int(rec["n_min"]), float(rec["z_tol"]))


def build_singleton_plan(point: float = 0.0, n_min: int = 512, n_targets: int = 64, targets=None,
                         z_tol: Optional[float] = None, n_window: Optional[int] = None) -> SingletonPlan:
    """Pick for every target ``z`` the coprime ``(n, m)``, ``n_min <= n < n_min + n_window``,
    whose chord distance ``cos(pi m / n)`` is closest.

    Default targets are ``n_targets`` equally spaced values in ``[0, 0.99]``;
    the default tolerance is ``max(0.01, pi / n_min)``, the spacing of the
    available distances near ``z = 0``.
    """
    z_tol = max(0.01, math.pi / n_min) if z_tol is None else z_tol
    if targets is None:
        targets = np.linspace(0.0, 0.99, n_targets)
    targets = np.asarray(targets, dtype=float)
    n_window = n_min if n_window is None else n_window
    ns = np.arange(max(n_min, 3), max(n_min, 3) + n_window)
    rays = []
    for t in targets:
        if not 0.0 <= t < 1.0:
            raise ValueError(f"target chord distance {t} outside [0, 1)")
        base = np.floor(ns * math.acos(t) / math.pi).astype(int)
        best = None
        for shift in (-1, 0, 1, 2):
            m = base + shift
            ok = (m >= 1) & (2 * m < ns) & (np.gcd(ns, m) == 1)
            if not ok.any():
                continue
            err = np.where(ok, np.abs(np.cos(math.pi * m / ns) - t), np.inf)
            i = int(np.argmin(err))
            if best is None or err[i] < best[0]:
                best = (err[i], int(ns[i]), int(m[i]))
        if best is None or best[0] > z_tol:
            raise ValueError(f"no coprime orbit with n >= {n_min} within {z_tol} of z = {t}")
        _, n, m = best
        rays.append(BrokenRay(n, m, 2.0 * math.pi * m / n, point, point))
    return SingletonPlan(float(point), targets, rays, int(n_min), float(z_tol))


def _values_for(rays, data) -> Tuple[np.ndarray, List[BrokenRay]]:
    """Normalized measurements for ``rays`` from a sinogram or a callable."""
    if callable(data):
        return np.array([float(data(r)) for r in rays]), []
    table = data.as_normalized().lookup()
    vals, missing = [], []
    for r in rays:
        v = table.get(_ray_key(r))
        if v is None:
            missing.append(r)
            vals.append(np.nan)
        else:
            vals.append(v)
    return np.array(vals), missing


def _quadratic_tail(zs, vals, z_new):
    coef = np.polyfit(zs[-3:], vals[-3:], 2)
    return np.polyval(coef, z_new)


def reconstruct_a0_singleton(data, plan: SingletonPlan, grid=None, max_gap: float = 0.1) -> RadialProfile:
    """Recover ``a_0`` from closed orbits through one point.

    The measured means estimate ``g`` at the orbits' chord distances; ``g`` is
    interpolated onto the grid, extended past the largest measured distance
    by a quadratic through the last three samples, turned into
    ``A_0 a_0 = 2 sqrt(1 - z^2) g`` and inverted.

    Raises
    ------
    MissingDataError
        If a planned ray has no measurement.
    ExtrapolationError
        If the largest measured distance is more than ``max_gap`` below 1.
    """
    grid = uniform_grid() if grid is None else np.asarray(grid, float)
    vals, missing = _values_for(plan.rays, data)
    if missing:
        lost = [plan.targets[i] for i, r in enumerate(plan.rays) if r in missing]
        raise MissingDataError(f"no data for {len(missing)} planned rays, targets {lost[:5]}...")
    z = np.array([r.z for r in plan.rays])
    order = np.argsort(z)
    z, vals = z[order], vals[order]
    keep = np.concatenate(([True], np.diff(z) > 1e-12))
    z, vals = z[keep], vals[keep]
    if 1.0 - z[-1] > max_gap:
        raise ExtrapolationError(f"largest chord distance {z[-1]:.4f} leaves a gap of {1 - z[-1]:.4f}")
    g = np.empty_like(grid)
    inside = grid <= z[-1]
    g[inside] = CubicSpline(z, vals)(grid[inside])
    g[~inside] = _quadratic_tail(z, vals, grid[~inside])
    h = 2.0 * np.sqrt(np.clip(1.0 - grid**2, 0.0, None)) * g
    return abel_inverse(0, RadialProfile(grid, h))


def modulus_of_continuity(field: FourierField, delta: float, n_theta: Optional[int] = None) -> float:
    """Upper estimate of ``omega_f(delta)`` from the largest gradient on a polar raster."""
    K = field.K
    n_theta = n_theta or max(64, 8 * K + 8)
    r = field.grid[1:]
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    ca = np.vstack((field.a, field.b))
    d_spline = field._spline.derivative()
    dr = d_spline(r)
    k = np.arange(K + 1)
    cos_kt, sin_kt = np.cos(np.outer(theta, k)), np.sin(np.outer(theta, k))
    a_r, b_r = dr[:, : K + 1], dr[:, K + 1 :]
    fr = a_r @ cos_kt.T + b_r @ sin_kt[:, 1:].T
    av, bv = field.a[:, 1:].T, field.b[:, 1:].T
    ft = (-(av * k) @ sin_kt.T + (bv * k[1:]) @ cos_kt[:, 1:].T) / r[:, None]
    lip = float(np.max(np.hypot(fr, ft)))
    return lip * delta


def convergence_study(field: FourierField, point: float, n_list: Sequence[int]) -> List[Tuple[int, float]]:
    """Largest deviation ``|G f(gamma) - g(z_gamma)|`` over coprime orbits of each length.

    For every ``n`` all orbits ``(n, m)`` with ``1 <= m < n/2`` and
    ``gcd(n, m) = 1`` through ``point`` are evaluated.
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    a0 = field.profile("a", 0)
    table = []
    for n in n_list:
        worst = 0.0
        for m in range(1, (n + 1) // 2):
            if 2 * m >= n or math.gcd(n, m) != 1:
                continue
            ray = BrokenRay(n, m, 2.0 * math.pi * m / n, point, point)
            worst = max(worst, abs(brt_analytic(field, ray) - radial_average(a0, ray.z)))
        table.append((n, worst))
    return table


# ---------------------------------------------------------------- open-set pipeline

@dataclass
class OpenSetPlan:
    """Symmetric ray families for every ``(axis, z)`` pair."""

    E: TomographySet
    K: int
    axes: Tuple[float, ...]
    z_grid: np.ndarray
    families: Dict[Tuple[int, int], List[BrokenRay]]
    lam_rel: float = DEFAULT_LAM_REL
    n_max: int = 400
    excluded: int = 0

    @property
    def rays(self) -> List[BrokenRay]:
        out = []
        for key in sorted(self.families):
            out.extend(self.families[key])
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "open",
            "E": self.E.to_dict(),
            "K": self.K,
            "axes": list(self.axes),
            "z_grid": list(map(float, self.z_grid)),
            "lam_rel": self.lam_rel,
            "n_max": self.n_max,
            "excluded": self.excluded,
            "families": [
                {"axis": i, "z": j, "rays": [r.to_dict() for r in self.families[(i, j)]]}
                for (i, j) in sorted(self.families)
            ],
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "OpenSetPlan":
        fam = {(int(f["axis"]), int(f["z"])): [BrokenRay.from_dict(r) for r in f["rays"]]
               for f in rec["families"]}
        return cls(TomographySet.from_dict(rec["E"]), int(rec["K"]), tuple(rec["axes"]),
                   np.array(rec["z_grid"], float), fam, float(rec["lam_rel"]), int(rec["n_max"]),
                   int(rec.get("excluded", 0)))


def default_axes(E: TomographySet) -> Tuple[float, float]:
    """Two axes inside the first arc, a third of its width apart, centred on its midpoint."""
    if E.kind != "open":
        raise ValueError("default axes need an open tomography set")
    start, width = E.arcs[0]
    mid = start + 0.5 * width
    return mid - width / 6.0, mid + width / 6.0


def check_axes(axes, K: int, tol: float = 1e-3):
    """Ensure ``k (phi_2 - phi_1)`` stays away from ``pi Z`` for ``1 <= k <= K``."""
    if len(axes) == 1:
        return
    gap = axes[1] - axes[0]
    for k in range(1, K + 1):
        x = k * gap / math.pi
        if abs(x - round(x)) < tol:
            raise AxisChoiceError(f"axes {axes} cannot separate harmonic {k}")


def _family(E, phi, z, n_max, K):
    rays = enumerate_symmetric_rays(E, phi, float(z), n_max)
    good = [r for r in rays if not is_near_degenerate(r, K)]
    return good, len(rays) - len(good)


def _family_cond(rays, K):
    if len(rays) < K + 2:
        return math.inf
    s = np.linalg.svd(_design(rays, K), compute_uv=False)
    return s[0] / s[-1] if s[-1] > 0 else math.inf


def select_z_grid(E: TomographySet, axes, K: int, n_max: int, count: int = 49, lo: float = 0.02,
                  hi: float = Z_MAX_OPEN, candidates: int = 12) -> np.ndarray:
    """Chord distances with well-conditioned ray families.

    ``[lo, hi]`` is cut into ``count`` bins and each bin contributes the
    candidate whose worst family (over the axes) has the smallest condition
    number.  Distances with ``alpha/pi`` close to a fraction ``p/q`` are
    avoided this way: there only near-closed orbits fit inside a short arc
    and the rows become nearly proportional.
    """
    edges = np.linspace(lo, hi, count + 1)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        best = None
        for z in np.linspace(a, b, candidates + 2)[1:-1]:
            worst = max(_family_cond(_family(E, phi, z, n_max, K)[0], K) for phi in axes)
            if best is None or worst < best[0]:
                best = (worst, z)
        out.append(best[1])
    return np.array(out)


def build_open_plan(E: TomographySet, K: int, n_max: int = 400, z_grid=None, axes=None,
                    lam_rel: float = DEFAULT_LAM_REL) -> OpenSetPlan:
    """Enumerate symmetric ray families for reconstruction from an open arc.

    Near-degenerate rays (``k alpha`` within ``(1e-9, 1e-6)`` of ``2 pi Z``
    for some ``k <= K``) are left out.  Chord distances above 0.98 are
    rejected.
    """
    axes = tuple(default_axes(E) if axes is None else axes)
    check_axes(axes, K)
    if z_grid is None:
        z_grid = select_z_grid(E, axes, K, n_max)
    z_grid = np.asarray(z_grid, dtype=float)
    if np.any(z_grid > Z_MAX_OPEN) or np.any(z_grid <= 0.0):
        raise ValueError(f"open-set chord distances must lie in (0, {Z_MAX_OPEN}]")
    if len(z_grid) < 4 or np.any(np.diff(z_grid) <= 0.0):
        raise ValueError("need at least 4 increasing chord distances")
    families, excluded = {}, 0
    for i, phi in enumerate(axes):
        for j, z in enumerate(z_grid):
            families[(i, j)], dropped = _family(E, phi, z, n_max, K)
            excluded += dropped
    return OpenSetPlan(E, K, axes, z_grid, families, lam_rel, n_max, excluded)


def family_conditions(plan: OpenSetPlan) -> Dict[Tuple[int, int], float]:
    """Condition number of the design matrix of every ``(axis, z)`` family."""
    return {key: _family_cond(rays, plan.K) for key, rays in sorted(plan.families.items())}


def tikhonov_solve(A: np.ndarray, y: np.ndarray, lam_rel: float):
    """Minimize ``|A c - y|^2 + lam |c|^2`` with ``lam = lam_rel * s_max^2``.

    Returns the solution and a diagnostics dict with the singular values'
    ratio ``cond`` and the regularized condition number
    ``cond_reg = s_max * max_i s_i / (s_i^2 + lam)``.
    """
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    lam = lam_rel * s[0] ** 2
    filt = s / (s * s + lam)
    c = Vt.T @ (filt * (U.T @ y))
    info = {
        "cond": float(s[0] / s[-1]) if s[-1] > 0 else math.inf,
        "cond_reg": float(s[0] * filt.max()),
        "rank": int(np.sum(s > s[0] * max(A.shape) * np.finfo(float).eps)),
        "residual": float(np.linalg.norm(A @ c - y)),
    }
    return c, info


def _design(rays, K):
    return np.array([s_coefficients(r, K) / r.length for r in rays])


@dataclass
class OpenSetResult:
    """Reconstructed field plus per-system diagnostics."""

    field: FourierField
    systems: List[dict]
    errors: List[dict] = dc_field(default_factory=list)
    harmonic_abel: Optional[np.ndarray] = None

    @property
    def cond_reg(self) -> float:
        return max(s["cond_reg"] for s in self.systems)

    @property
    def cond(self) -> float:
        return max(s["cond"] for s in self.systems)


def reconstruct_open(data, plan: OpenSetPlan, grid=None, threads: Optional[int] = None) -> OpenSetResult:
    """Recover a band-limited field from symmetric rays with endpoints in an open arc.

    Parameters
    ----------
    data : Sinogram or callable
        Normalized measurements; a callable maps a ray to its value.
    plan : OpenSetPlan
    grid : array_like, optional
        Radial grid of the result.

    Raises
    ------
    RankDeficiencyError
        If some ``(axis, z)`` family has fewer than ``K + 2`` measured rays.
    """
    grid = uniform_grid() if grid is None else np.asarray(grid, float)
    K = plan.K
    check_axes(plan.axes, K)
    keys = sorted(plan.families)
    errors, failures = [], []

    def solve(key):
        rays = plan.families[key]
        vals, missing = _values_for(rays, data)
        use = [r for r, v in zip(rays, vals) if np.isfinite(v)]
        y = vals[np.isfinite(vals)]
        info = {"axis": key[0], "z": float(plan.z_grid[key[1]]), "rays": len(use), "missing": len(missing)}
        if len(use) < K + 2:
            rank = int(np.linalg.matrix_rank(_design(use, K))) if use else 0
            return None, dict(info, rank=rank, cond=math.inf, cond_reg=math.inf)
        c, diag = tikhonov_solve(_design(use, K), y, plan.lam_rel)
        return c, dict(info, **diag)

    workers = resolve_threads(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve, keys))
    else:
        results = [solve(k) for k in keys]

    n_axes, n_z = len(plan.axes), len(plan.z_grid)
    C = np.full((n_axes, n_z, K + 1), np.nan)
    systems = []
    for key, (c, info) in zip(keys, results):
        systems.append(info)
        if info["missing"]:
            errors.append({"error": "missing-data", "axis": info["axis"], "z": info["z"], "missing": info["missing"]})
        if c is None:
            failures.append({"axis": info["axis"], "z": info["z"], "rays": info["rays"], "rank": info["rank"],
                             "missing": info["missing"]})
        else:
            C[key[0], key[1]] = c
    if failures:
        raise RankDeficiencyError(
            f"{len(failures)} (axis, z) systems have fewer than {K + 2} rays; first: {failures[0]}", failures)

    # separate cosine and sine parts: c_k(phi) = cos(k phi) A_k + sin(k phi) B_k
    AB = np.zeros((2, K + 1, n_z))
    AB[0, 0] = C[:, :, 0].mean(axis=0)
    phis = np.array(plan.axes)
    for k in range(1, K + 1):
        if n_axes == 1:
            AB[0, k] = C[0, :, k] / math.cos(k * phis[0])
            continue
        M = np.array([[math.cos(k * phis[0]), math.sin(k * phis[0])],
                      [math.cos(k * phis[1]), math.sin(k * phis[1])]])
        sol = np.linalg.solve(M, C[:2, :, k])
        AB[0, k], AB[1, k] = sol[0], sol[1]

    a = np.zeros((K + 1, len(grid)))
    b = np.zeros((K, len(grid)))
    for k in range(K + 1):
        a[k] = _invert_on_grid(k, plan.z_grid, AB[0, k], grid)
        if k:
            b[k - 1] = _invert_on_grid(k, plan.z_grid, AB[1, k], grid)
    res = OpenSetResult(FourierField(grid, a, b), systems, errors, AB)
    return res


def _invert_on_grid(k, zs, vals, grid):
    """Spread ``A_k`` samples over the grid and invert."""
    if not np.any(vals):
        return np.zeros_like(grid)
    # A_k f vanishes like sqrt(1 - z^2) at z = 1; interpolate the smooth quotient
    u = vals / np.sqrt(1.0 - zs**2)
    spl = CubicSpline(zs, u)
    out = np.empty_like(grid)
    inside = grid <= zs[-1]
    out[inside] = spl(grid[inside])
    out[~inside] = _quadratic_tail(zs, u, grid[~inside])
    h = np.sqrt(np.clip(1.0 - grid**2, 0.0, None)) * out
    return abel_inverse(k, RadialProfile(grid, h)).values


# ---------------------------------------------------------------- metrics

def profile_l2(values, grid) -> float:
    """``sqrt(int_0^1 v(r)^2 dr)`` by the trapezoid rule."""
    return float(math.sqrt(trapezoid(np.asarray(values) ** 2, grid)))


def field_metrics(truth: FourierField, recon: FourierField, n_theta: Optional[int] = None) -> dict:
    """L2, Linf and per-coefficient errors between two fields on one grid."""
    if truth.grid.shape != recon.grid.shape or np.max(np.abs(truth.grid - recon.grid)) > 0:
        raise ValueError("fields live on different grids")
    K = max(truth.K, recon.K)
    N1 = len(truth.grid)

    def padded(f):
        a = np.zeros((K + 1, N1))
        b = np.zeros((K, N1))
        a[: f.K + 1] = f.a
        b[: f.K] = f.b
        return a, b

    ta, tb = padded(truth)
    ra, rb = padded(recon)
    da, db = ra - ta, rb - tb
    g = truth.grid
    per = {f"a{k}": profile_l2(da[k], g) for k in range(K + 1)}
    per.update({f"b{k}": profile_l2(db[k - 1], g) for k in range(1, K + 1)})
    # Parseval over the disk: int |f|^2 = int (2 pi a0^2 + pi sum(a_k^2 + b_k^2)) r dr
    dens = 2.0 * math.pi * da[0] ** 2 + math.pi * (np.sum(da[1:] ** 2, axis=0) + np.sum(db**2, axis=0))
    l2 = math.sqrt(trapezoid(dens * g, g))
    n_theta = n_theta or max(64, 4 * K + 4)
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    diff = recon.eval(g[:, None], theta[None, :]) - truth.eval(g[:, None], theta[None, :])
    ref = profile_l2(ta[0], g)
    return {
        "l2": l2,
        "linf": float(np.max(np.abs(diff))),
        "per_coefficient_l2": per,
        "a0_relative_l2": per["a0"] / ref if ref > 0 else math.inf,
    }
