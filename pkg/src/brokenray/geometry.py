"""Broken rays in the unit disk: construction, tracing and enumeration.

A broken ray is a billiard path inside the unit disk that starts and ends on
the boundary.  It is stored through five numbers: the segment count ``n``,
the winding number ``m``, the signed central angle ``alpha`` of each chord and
the unwrapped boundary angles ``iota`` (start) and ``kappa`` (end), tied
together by ``n * alpha = kappa - iota + 2*pi*m``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi
TRAJECTORY_TOL = 1e-12
SPECULAR_TOL = 1e-10


class InvalidRayError(ValueError):
    """Raised when ray parameters violate the trajectory invariants."""


class DegenerateChordError(InvalidRayError):
    """Raised when the chord angle is a multiple of 2*pi (zero-length chords)."""


def _trajectory_scale(n, m, alpha, iota, kappa):
    # absolute tolerance grows with the magnitude of the unwrapped angles
    return max(1.0, abs(n * alpha), abs(iota), abs(kappa), TWO_PI * abs(m))


@dataclass(frozen=True)
class BrokenRay:
    """Reflecting trajectory in the closed unit disk.

    Parameters
    ----------
    n : int
        Number of straight segments, at least 1.
    m : int
        Winding number.
    alpha : float
        Signed central angle subtended by every chord, in ``[-pi, pi]``.
    iota, kappa : float
        Unwrapped start and end boundary angles.
    """

    n: int
    m: int
    alpha: float
    iota: float
    kappa: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidRayError(f"segment count must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        for name in ("alpha", "iota", "kappa"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if _distance_to_2pi_multiple(self.alpha) <= TRAJECTORY_TOL:
            raise DegenerateChordError(f"alpha={self.alpha!r} is a multiple of 2*pi")
        if abs(self.alpha) > math.pi * (1.0 + 1e-14):
            raise InvalidRayError(
                f"|alpha| must not exceed pi, got {self.alpha!r}; build the ray with make_ray"
            )
        gap = self.n * self.alpha - (self.kappa - self.iota + TWO_PI * self.m)
        tol = TRAJECTORY_TOL * _trajectory_scale(self.n, self.m, self.alpha, self.iota, self.kappa)
        if abs(gap) > tol:
            raise InvalidRayError(f"trajectory condition violated by {gap:.3e} rad")

    @property
    def z(self) -> float:
        """Distance from the origin to every chord."""
        return max(0.0, math.cos(0.5 * self.alpha))

    @property
    def d(self) -> float:
        """Length of every chord."""
        return 2.0 * abs(math.sin(0.5 * self.alpha))

    @property
    def length(self) -> float:
        """Total length ``n * d``."""
        return self.n * self.d

    def vertex_angles(self) -> np.ndarray:
        """Boundary angles ``iota + l*alpha`` for ``l = 0..n``."""
        return self.iota + self.alpha * np.arange(self.n + 1)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "alpha": self.alpha, "iota": self.iota, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, rec: dict) -> "BrokenRay":
        """Load a ray record, checking the redundant ``alpha`` field."""
        n, m = int(rec["n"]), int(rec["m"])
        iota, kappa = float(rec["iota"]), float(rec["kappa"])
        if n < 1:
            raise InvalidRayError(f"segment count must be positive, got {n}")
        expected = (kappa - iota + TWO_PI * m) / n
        alpha = float(rec.get("alpha", expected))
        if abs(alpha - expected) > TRAJECTORY_TOL * _trajectory_scale(n, m, alpha, iota, kappa):
            raise InvalidRayError(f"stored alpha {alpha!r} disagrees with {expected!r}")
        return cls(n, m, alpha, iota, kappa)


def _distance_to_2pi_multiple(x):
    return abs(x - TWO_PI * round(x / TWO_PI))


def make_ray(n: int, m: int, iota: float, kappa: float) -> BrokenRay:
    """Build the ray with ``alpha = (kappa - iota + 2*pi*m) / n``.

    Chord angles outside ``(-pi, pi]`` describe the same vertices as their
    representative shifted by a multiple of 2*pi; the shift is absorbed into
    ``m`` so that ``z = cos(alpha/2)`` stays nonnegative.

    Raises
    ------
    InvalidRayError
        If ``n < 1``.
    DegenerateChordError
        If ``alpha`` is a multiple of 2*pi.
    """
    if int(n) != n or n < 1:
        raise InvalidRayError(f"segment count must be a positive integer, got {n}")
    n, m = int(n), int(m)
    alpha = (kappa - iota + TWO_PI * m) / n
    if _distance_to_2pi_multiple(alpha) <= TRAJECTORY_TOL * max(1.0, abs(alpha)):
        raise DegenerateChordError(f"alpha={alpha!r} is a multiple of 2*pi")
    shift = math.ceil((alpha - math.pi) / TWO_PI)
    if shift:
        alpha -= TWO_PI * shift
        m -= n * shift
    return BrokenRay(n, m, alpha, float(iota), float(kappa))


def rotate_ray(ray: BrokenRay, phi: float) -> BrokenRay:
    """Rotate a ray counterclockwise by ``phi``."""
    return BrokenRay(ray.n, ray.m, ray.alpha, ray.iota + phi, ray.kappa + phi)


def trace(ray: BrokenRay) -> np.ndarray:
    """Vertices of the ray as an ``(n+1, 2)`` array of unit-circle points."""
    th = ray.vertex_angles()
    return np.column_stack((np.cos(th), np.sin(th)))


def reflect_check(ray_or_points, tol: float = SPECULAR_TOL) -> bool:
    """Check specular reflection at every interior vertex.

    Parameters
    ----------
    ray_or_points : BrokenRay or array_like
        A ray, or a raw polyline of shape ``(n+1, 2)`` with vertices on the
        unit circle.
    tol : float
        Allowed deviation of the outgoing unit direction.
    """
    pts = trace(ray_or_points) if isinstance(ray_or_points, BrokenRay) else np.asarray(ray_or_points, float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("reflect_check needs at least two segments")
    seg = np.diff(pts, axis=0)
    seg /= np.linalg.norm(seg, axis=1)[:, None]
    u, v = seg[:-1], seg[1:]
    nu = pts[1:-1] / np.linalg.norm(pts[1:-1], axis=1)[:, None]
    mirrored = u - 2.0 * np.sum(u * nu, axis=1)[:, None] * nu
    return bool(np.all(np.linalg.norm(v - mirrored, axis=1) <= tol))


def trace_csv(ray: BrokenRay) -> str:
    """Polyline of the ray as CSV text with an ``x,y`` header."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y"])
    for x, y in trace(ray):
        w.writerow([f"{x:.17g}", f"{y:.17g}"])
    return buf.getvalue()


@dataclass(frozen=True)
class TomographySet:
    """Boundary region where rays may enter and leave.

    ``kind`` is ``"singleton"`` (one angle), ``"open"`` (finite union of open
    arcs) or ``"full"`` (the whole circle).  Arcs are stored as
    ``(start mod 2*pi, length)`` pairs.
    """

    kind: str
    point: float = 0.0
    arcs: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "singleton":
            object.__setattr__(self, "point", float(self.point) % TWO_PI)
        elif self.kind == "open":
            if not self.arcs:
                raise ValueError("open tomography set needs at least one arc")
            norm = []
            for start, length in self.arcs:
                if not 0.0 < length < TWO_PI:
                    raise ValueError(f"arc length must lie in (0, 2*pi), got {length}")
                norm.append((float(start) % TWO_PI, float(length)))
            norm.sort()
            for i, (s, L) in enumerate(norm):
                nxt_s = norm[(i + 1) % len(norm)][0] + (TWO_PI if i + 1 == len(norm) else 0.0)
                if len(norm) > 1 and s + L > nxt_s:
                    raise ValueError("arcs overlap")
            object.__setattr__(self, "arcs", tuple(norm))
        elif self.kind != "full":
            raise ValueError(f"unknown tomography set kind {self.kind!r}")

    @classmethod
    def singleton(cls, point: float) -> "TomographySet":
        return cls("singleton", point=point)

    @classmethod
    def from_intervals(cls, intervals: Iterable[Sequence[float]]) -> "TomographySet":
        """Open set from ``(a, b)`` pairs meaning the arc from ``a`` to ``b``."""
        return cls("open", arcs=tuple((a, b - a) for a, b in intervals))

    @classmethod
    def full(cls) -> "TomographySet":
        return cls("full")

    def contains(self, theta: float, tol: float = 1e-12) -> bool:
        """Membership of a boundary angle, tested modulo 2*pi."""
        if self.kind == "full":
            return True
        if self.kind == "singleton":
            delta = (theta - self.point + math.pi) % TWO_PI - math.pi
            return abs(delta) <= tol
        for start, length in self.arcs:
            off = (theta - start) % TWO_PI
            if 0.0 < off < length:
                return True
        return False

    def to_dict(self) -> dict:
        if self.kind == "singleton":
            return {"kind": "singleton", "point": self.point}
        if self.kind == "full":
            return {"kind": "full"}
        return {"kind": "open", "intervals": [[s, s + L] for s, L in self.arcs]}

    @classmethod
    def from_dict(cls, rec: dict) -> "TomographySet":
        kind = rec["kind"]
        if kind == "singleton":
            return cls.singleton(rec["point"])
        if kind == "full":
            return cls.full()
        return cls.from_intervals(rec["intervals"])


def enumerate_symmetric_rays(E: TomographySet, axis: float, z: float, n_max: int) -> List[BrokenRay]:
    """Rays mirror-symmetric about ``axis`` with chord distance ``z``.

    For each ``n`` in ``2..n_max`` the winding number is the nearest integer
    to ``n*alpha/(2*pi)`` with ``alpha = 2*arccos(z)``, which puts the two
    endpoints at ``axis -+ beta`` with ``|beta| <= alpha/2``.  Only rays with
    both endpoints in ``E`` are returned.
    """
    if not 0.0 <= z < 1.0:
        raise ValueError(f"chord distance must lie in [0, 1), got {z}")
    if not E.contains(axis, tol=1e-9):
        raise ValueError(f"axis {axis} is not inside the tomography set")
    alpha = 2.0 * math.acos(z)
    rays = []
    for n in range(2, n_max + 1):
        m = round(n * alpha / TWO_PI)
        beta = 0.5 * (n * alpha - TWO_PI * m)
        iota, kappa = axis - beta, axis + beta
        if E.contains(iota, tol=1e-9) and E.contains(kappa, tol=1e-9):
            rays.append(BrokenRay(n, m, alpha, iota, kappa))
    return rays


def enumerate_singleton_rays(point: float, n_max: int) -> List[BrokenRay]:
    """Closed coprime orbits through one boundary point.

    Returns every ray with ``iota = kappa = point``, ``2 <= n <= n_max``,
    ``1 <= m < n/2`` and ``gcd(n, m) = 1``.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    rays = []
    for n in range(2, n_max + 1):
        for m in range(1, (n + 1) // 2):
            if 2 * m < n and math.gcd(n, m) == 1:
                rays.append(BrokenRay(n, m, TWO_PI * m / n, point, point))
    return rays
