"""Straight and curvilinear polygons, truncated sectors and the vertex/side/core decomposition.

Conventions: boundaries are traversed counterclockwise, sides are
parametrized by arc length, the outer normal is the tangent rotated clockwise
by pi/2, and the curvature H satisfies nu' = H gamma' (H > 0 on convex arcs).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .errors import (
    ChainNotClosed,
    DegenerateAngle,
    DeltaTooLarge,
    NoConvergence,
    ObtuseHalfAngle,
    SelfIntersection,
)

CLOSURE_TOL = 1e-10
ANGLE_TOL = 1e-6

STAR, EXT, OUT = "star", "ext", "out"


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _rot_cw(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _rot_ccw(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


# ---------------------------------------------------------------------------
# sides


class SideCurve:
    """A unit-speed side gamma: [0, length] -> R^2."""

    kind: str = "general"
    length: float

    def point(self, s):
        raise NotImplementedError

    def tangent(self, s):
        raise NotImplementedError

    def curvature(self, s):
        raise NotImplementedError

    def normal(self, s):
        """Outer normal: the tangent rotated clockwise."""
        return _rot_cw(self.tangent(s))

    @property
    def start(self) -> np.ndarray:
        return np.asarray(self.point(0.0), dtype=float)

    @property
    def end(self) -> np.ndarray:
        return np.asarray(self.point(self.length), dtype=float)

    def polyline(self, m: int) -> np.ndarray:
        return self.point(np.linspace(0.0, self.length, m + 1))

    def max_abs_curvature(self) -> float:
        return float(np.max(np.abs(self.curvature(np.linspace(0.0, self.length, 401)))))


class StraightSide(SideCurve):
    kind = "straight"

    def __init__(self, start, end):
        self._a = np.asarray(start, dtype=float)
        b = np.asarray(end, dtype=float)
        d = b - self._a
        self.length = float(np.hypot(d[0], d[1]))
        if not self.length > 0:
            raise ValueError("side length must be positive")
        self._t = d / self.length
        self._b = b

    def point(self, s):
        s = np.asarray(s, dtype=float)
        p = self._a + s[..., None] * self._t
        # hit the end point exactly
        return np.where((s == self.length)[..., None], self._b, p)

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(self._t, s.shape + (2,)).copy()

    def curvature(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def __repr__(self):
        return f"StraightSide({self._a.tolist()} -> {self._b.tolist()})"


class ArcSide(SideCurve):
    """Circular arc of constant curvature H != 0 starting at ``start`` with heading angle ``heading``."""

    kind = "arc"

    def __init__(self, start, heading: float, curvature: float, length: float):
        if curvature == 0:
            raise ValueError("use StraightSide for zero curvature")
        if not length > 0:
            raise ValueError("side length must be positive")
        self._a = np.asarray(start, dtype=float)
        self._phi = float(heading)
        self.H = float(curvature)
        self.length = float(length)
        t0 = np.array([math.cos(self._phi), math.sin(self._phi)])
        self.center = self._a + _rot_ccw(t0) / self.H
        self.radius = 1.0 / abs(self.H)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        ang = self._phi + self.H * s
        # position relative to the center is -(1/H) * (left normal of the tangent)
        return self.center + np.stack([np.sin(ang), -np.cos(ang)], axis=-1) / self.H

    def tangent(self, s):
        ang = self._phi + self.H * np.asarray(s, dtype=float)
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)

    def curvature(self, s):
        return np.full_like(np.asarray(s, dtype=float), self.H)

    def project(self, x):
        """Closest point on the full circle."""
        x = np.asarray(x, dtype=float)
        d = x - self.center
        return self.center + self.radius * d / np.linalg.norm(d, axis=-1, keepdims=True)

    def __repr__(self):
        return f"ArcSide(start={self._a.tolist()}, H={self.H}, length={self.length})"


class GeneralSide(SideCurve):
    """Smooth side given by a parametrization c(u), u in [u0, u1], reparametrized by arc length."""

    kind = "general"

    def __init__(self, f, df, ddf, u0: float, u1: float, panels: int = 256):
        self._f, self._df, self._ddf = f, df, ddf
        self._u0, self._u1 = float(u0), float(u1)
        self._gx, self._gw = np.polynomial.legendre.leggauss(8)
        self._uk = np.linspace(self._u0, self._u1, panels + 1)
        seg = np.array([self._integral(a, b) for a, b in zip(self._uk[:-1], self._uk[1:])])
        self._sk = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self._sk[-1])
        if not self.length > 0:
            raise ValueError("side length must be positive")

    @classmethod
    def from_samples(cls, points: Sequence[Sequence[float]]) -> "GeneralSide":
        """Cubic spline through samples, parametrized by cumulative chord length."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
            raise ValueError("general side needs at least 4 samples (x, y)")
        chord = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
        spline = CubicSpline(chord, pts, axis=0)
        d1, d2 = spline.derivative(1), spline.derivative(2)
        return cls(spline, d1, d2, 0.0, float(chord[-1]), panels=max(256, 2 * len(pts)))

    def _speed(self, u):
        d = np.asarray(self._df(u), dtype=float)
        return np.hypot(d[..., 0], d[..., 1])

    def _integral(self, a, b):
        x = 0.5 * (b - a) * self._gx + 0.5 * (b + a)
        return 0.5 * (b - a) * float(np.dot(self._gw, self._speed(x)))

    def _arclength(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(self._uk, u, side="right") - 1, 0, len(self._uk) - 2)
        a = self._uk[k]
        x = 0.5 * (u - a)[..., None] * self._gx + 0.5 * (u + a)[..., None]
        return self._sk[k] + 0.5 * (u - a) * np.sum(self._gw * self._speed(x), axis=-1)

    def param(self, s) -> np.ndarray:
        """Parameter u with arc length s (Newton on the tabulated arc-length map)."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        u = np.interp(s, self._sk, self._uk)
        for _ in range(6):
            u = np.clip(u - (self._arclength(u) - s) / self._speed(u), self._u0, self._u1)
        return u

    def point(self, s):
        return np.asarray(self._f(self.param(s)), dtype=float)

    def tangent(self, s):
        d = np.asarray(self._df(self.param(s)), dtype=float)
        return d / np.hypot(d[..., 0], d[..., 1])[..., None]

    def curvature(self, s):
        u = self.param(s)
        d1 = np.asarray(self._df(u), dtype=float)
        d2 = np.asarray(self._ddf(u), dtype=float)
        return _cross(d1, d2) / np.hypot(d1[..., 0], d1[..., 1]) ** 3


# ---------------------------------------------------------------------------
# boundary pieces and regions (meshing input)


@dataclass(frozen=True)
class BoundaryPiece:
    """A boundary arc u in [0,1] -> R^2 with a partition tag (star/ext/out) and a label."""

    func: Callable[[np.ndarray], np.ndarray]
    length: float
    partition: str
    label: str
    straight: bool = True

    @classmethod
    def segment(cls, a, b, partition: str, label: str) -> "BoundaryPiece":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)

        def f(u, a=a, b=b):
            u = np.asarray(u, dtype=float)[..., None]
            return np.where(u == 1.0, b, a + u * (b - a))

        return cls(f, float(np.hypot(*(b - a))), partition, label, True)

    @classmethod
    def from_side(cls, side: SideCurve, s0: float, s1: float, partition: str, label: str, offset: float = 0.0):
        """Sub-arc of a side (optionally its inner parallel curve at distance ``offset``)."""

        def f(u, side=side, s0=s0, s1=s1, t=offset):
            s = s0 + np.asarray(u, dtype=float) * (s1 - s0)
            p = side.point(s)
            return p - t * side.normal(s) if t else p

        if side.kind == "straight":
            length = abs(s1 - s0)
        else:
            ss = np.linspace(s0, s1, 2049)
            pts = f((ss - s0) / (s1 - s0))
            length = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
        return cls(f, length, partition, label, side.kind == "straight")

    @classmethod
    def circular(cls, center, radius: float, phi0: float, sweep: float, partition: str, label: str):
        c = np.asarray(center, dtype=float)

        def f(u, c=c, r=radius, p0=phi0, sw=sweep):
            ang = p0 + np.asarray(u, dtype=float) * sw
            return c + r * np.stack([np.cos(ang), np.sin(ang)], axis=-1)

        return cls(f, abs(sweep) * radius, partition, label, False)

    @property
    def start(self) -> np.ndarray:
        return np.asarray(self.func(np.array(0.0)), dtype=float)

    @property
    def end(self) -> np.ndarray:
        return np.asarray(self.func(np.array(1.0)), dtype=float)

    def sample(self, m: int) -> np.ndarray:
        """m+1 points including both ends."""
        return np.asarray(self.func(np.linspace(0.0, 1.0, m + 1)), dtype=float)


@dataclass(frozen=True)
class Region:
    pieces: tuple[BoundaryPiece, ...]
    name: str = ""

    def polyline(self, per_curve: int = 1024) -> np.ndarray:
        out = []
        for p in self.pieces:
            m = 1 if p.straight else per_curve
            out.append(p.sample(m)[:-1])
        return np.concatenate(out)

    def _shoelace(self, per_curve: int) -> float:
        p = self.polyline(per_curve)
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]))

    def area(self, per_curve: int = 2048) -> float:
        """Signed area; polygonal quadrature with one Richardson step for curved pieces."""
        if all(p.straight for p in self.pieces):
            return self._shoelace(1)
        a1, a2 = self._shoelace(per_curve), self._shoelace(2 * per_curve)
        return (4.0 * a2 - a1) / 3.0

    def corners(self) -> np.ndarray:
        return np.array([p.start for p in self.pieces])

    def diameter(self) -> float:
        p = self.polyline(64)
        lo, hi = p.min(axis=0), p.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def partition_length(self, partition: str) -> float:
        return float(sum(p.length for p in self.pieces if p.partition == partition))

    def is_simple(self, per_curve: int = 256) -> bool:
        from shapely.geometry import LinearRing

        return bool(LinearRing(self.polyline(per_curve)).is_simple)


# ---------------------------------------------------------------------------
# polygons


def _half_angle(t_in: np.ndarray, t_out: np.ndarray) -> float:
    """Half-angle at a vertex from the incoming (end of previous side) and outgoing tangents."""
    c = float(np.dot(t_in, -t_out))
    s = float(_cross(t_out, -t_in))
    two = math.atan2(s, c)
    if two <= 0.0:
        two += 2.0 * math.pi
    return 0.5 * two


@dataclass(frozen=True)
class CurvilinearPolygon:
    sides: tuple[SideCurve, ...]
    name: str = ""
    vertices: np.ndarray = field(init=False, repr=False)
    half_angles: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sides = tuple(self.sides)
        object.__setattr__(self, "sides", sides)
        if len(sides) < 2:
            raise ValueError("a polygon needs at least two sides")
        for j, s in enumerate(sides):
            if not s.length > 0:
                raise ValueError(f"side {j} has non-positive length")
        m = len(sides)
        for j in range(m):
            gap = float(np.hypot(*(sides[j].end - sides[(j + 1) % m].start)))
            if gap > CLOSURE_TOL:
                raise ChainNotClosed(f"side {j} ends {gap:.3e} away from the start of side {(j + 1) % m}")
        verts = np.array([s.start for s in sides])
        theta = np.array(
            [_half_angle(sides[j - 1].tangent(sides[j - 1].length), sides[j].tangent(0.0)) for j in range(m)]
        )
        for j, th in enumerate(theta):
            for bad in (0.0, 0.5 * math.pi, math.pi):
                if abs(th - bad) < ANGLE_TOL:
                    raise DegenerateAngle(f"half-angle at vertex {j} is {th:.9f}, too close to {bad:.6f}")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "half_angles", theta)
        ring = np.concatenate([s.polyline(1 if s.kind == "straight" else 1000)[:-1] for s in sides])
        from shapely.geometry import LinearRing

        if not LinearRing(ring).is_simple:
            raise SelfIntersection("boundary polyline intersects itself")
        q = np.roll(ring, -1, axis=0)
        if np.sum(ring[:, 0] * q[:, 1] - ring[:, 1] * q[:, 0]) <= 0:
            raise ValueError("boundary must be oriented counterclockwise")

    # -- basic data
    @property
    def n_sides(self) -> int:
        return len(self.sides)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.sides])

    @property
    def convex_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.half_angles < 0.5 * math.pi)

    @property
    def is_straight(self) -> bool:
        return all(s.kind == "straight" for s in self.sides)

    @property
    def has_constant_curvature(self) -> bool:
        return all(s.kind in ("straight", "arc") for s in self.sides)

    def side_curvature(self, j: int) -> Callable[[np.ndarray], np.ndarray]:
        return self.sides[j].curvature

    def recomputed_cos2theta(self, j: int) -> float:
        prev = self.sides[j - 1]
        return float(np.dot(prev.tangent(prev.length), -self.sides[j].tangent(0.0)))

    def region(self, label_prefix: str = "side") -> Region:
        pieces = tuple(
            BoundaryPiece.from_side(s, 0.0, s.length, STAR, f"{label_prefix}{j}") for j, s in enumerate(self.sides)
        )
        return Region(pieces, self.name)

    def area(self) -> float:
        return self.region().area()

    def perimeter(self) -> float:
        return float(self.lengths.sum())

    def diameter(self) -> float:
        return self.region().diameter()


# ---------------------------------------------------------------------------
# construction from descriptions


def _side_from_dict(d: dict, start: np.ndarray, prev_heading: float | None) -> SideCurve:
    kind = str(d.get("kind", "arc" if "curvature" in d else "general" if "samples" in d else "straight")).lower()
    if "start" in d:
        start = np.asarray(d["start"], dtype=float)
    heading = None
    if "heading" in d:
        heading = float(d["heading"])
    elif "heading_deg" in d:
        heading = math.radians(float(d["heading_deg"]))
    elif "turn" in d or "turn_deg" in d:
        if prev_heading is None:
            raise ValueError("'turn' needs a previous side")
        turn = float(d["turn"]) if "turn" in d else math.radians(float(d["turn_deg"]))
        heading = prev_heading + turn
    if kind in ("straight", "line", "segment"):
        if "end" in d:
            return StraightSide(start, d["end"])
        if heading is None or "length" not in d:
            raise ValueError("straight side needs 'end' or 'length' with a heading")
        ell = float(d["length"])
        return StraightSide(start, start + ell * np.array([math.cos(heading), math.sin(heading)]))
    if kind in ("arc", "circular-arc", "circle"):
        H = float(d["curvature"])
        if "end" in d:
            end = np.asarray(d["end"], dtype=float)
            chord = float(np.hypot(*(end - start)))
            R = 1.0 / abs(H)
            if chord > 2 * R * (1 + 1e-12):
                raise ValueError("arc chord longer than the diameter")
            half = math.asin(min(1.0, chord / (2 * R)))
            sweep = 2 * half if not d.get("major", False) else 2 * math.pi - 2 * half
            ell = float(d.get("length", R * sweep))
            cd = end - start
            base = math.atan2(cd[1], cd[0])
            # the heading leans into the turn by half the swept angle
            heading = base - 0.5 * H * ell
            return ArcSide(start, heading, H, ell)
        if heading is None or "length" not in d:
            raise ValueError("arc side needs 'end' or 'length' with a heading")
        return ArcSide(start, heading, H, float(d["length"]))
    if kind == "general":
        pts = np.asarray(d["samples"], dtype=float)
        return GeneralSide.from_samples(pts)
    raise ValueError(f"unknown side kind {kind!r}")


def build_polygon(spec, name: str = "") -> CurvilinearPolygon:
    """Build a polygon from side descriptions (a list of dicts or {'sides': [...]}).

    Each side may give ``start`` (defaults to the previous end), and either an
    ``end`` point or a ``length`` with a ``heading``/``turn`` (radians, or the
    ``*_deg`` variants).  Arcs need ``curvature``; general sides need ``samples``.
    """
    if isinstance(spec, dict):
        name = name or str(spec.get("name", ""))
        spec = spec["sides"]
    if len(spec) < 2:
        raise ValueError("a polygon needs at least two sides")
    sides: list[SideCurve] = []
    start = np.zeros(2)
    heading = None
    for d in spec:
        side = _side_from_dict(d, start, heading)
        sides.append(side)
        start = side.end
        t = side.tangent(side.length)
        heading = math.atan2(t[1], t[0])
    return CurvilinearPolygon(tuple(sides), name)


def polygon_from_vertices(points, name: str = "") -> CurvilinearPolygon:
    pts = np.asarray(points, dtype=float)
    m = len(pts)
    return CurvilinearPolygon(tuple(StraightSide(pts[j], pts[(j + 1) % m]) for j in range(m)), name)


def square(l: float = 1.0) -> CurvilinearPolygon:
    return polygon_from_vertices([(0, 0), (l, 0), (l, l), (0, l)], f"square({l:g})")


def rectangle(a: float, b: float) -> CurvilinearPolygon:
    return polygon_from_vertices([(0, 0), (a, 0), (a, b), (0, b)], f"rectangle({a:g},{b:g})")


def equilateral(l: float = 1.0) -> CurvilinearPolygon:
    return polygon_from_vertices([(0, 0), (l, 0), (0.5 * l, 0.5 * math.sqrt(3.0) * l)], f"equilateral({l:g})")


def regular_ngon(n: int, l: float = 1.0) -> CurvilinearPolygon:
    R = l / (2.0 * math.sin(math.pi / n))
    ang = -0.5 * math.pi - math.pi / n + 2.0 * math.pi * np.arange(n) / n
    return polygon_from_vertices(np.c_[R * np.cos(ang), R * np.sin(ang)], f"regular-ngon({n},{l:g})")


def half_disk(R: float = 1.0) -> CurvilinearPolygon:
    diameter = StraightSide((-R, 0.0), (R, 0.0))
    arc = ArcSide((R, 0.0), 0.5 * math.pi, 1.0 / R, math.pi * R)
    return CurvilinearPolygon((diameter, arc), f"half-disk({R:g})")


def half_ellipse(a: float, b: float) -> CurvilinearPolygon:
    """Diameter [-a, a] closed by the upper half of the ellipse x^2/a^2 + y^2/b^2 = 1."""
    f = lambda u: np.stack([a * np.cos(u), b * np.sin(u)], axis=-1)
    df = lambda u: np.stack([-a * np.sin(u), b * np.cos(u)], axis=-1)
    ddf = lambda u: np.stack([-a * np.cos(u), -b * np.sin(u)], axis=-1)
    arc = GeneralSide(f, df, ddf, 0.0, math.pi)
    return CurvilinearPolygon((StraightSide((-a, 0.0), (a, 0.0)), arc), f"half-ellipse({a:g},{b:g})")


def l_shape(a: float = 1.0) -> CurvilinearPolygon:
    """Hexagon [0,2a]^2 minus [a,2a]^2; one concave vertex at (a, a)."""
    return polygon_from_vertices([(0, 0), (2 * a, 0), (2 * a, a), (a, a), (a, 2 * a), (0, 2 * a)], f"l-shape({a:g})")


BUILTINS: dict[str, Callable[..., CurvilinearPolygon]] = {
    "square": square,
    "rectangle": rectangle,
    "equilateral": equilateral,
    "half-disk": half_disk,
    "regular-ngon": regular_ngon,
    "half-ellipse": half_ellipse,
    "l-shape": l_shape,
}


def polygon_by_name(ref: str) -> CurvilinearPolygon:
    """Resolve a built-in such as 'square(1)' or 'regular-ngon(5,1)'; a bare name uses defaults."""
    m = re.fullmatch(r"\s*([A-Za-z][\w-]*)\s*(?:\((.*)\))?\s*", ref)
    if not m or m.group(1).lower() not in BUILTINS:
        raise KeyError(f"unknown polygon {ref!r}; built-ins: {', '.join(sorted(BUILTINS))}")
    key = m.group(1).lower()
    args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
    vals = [int(a) if key == "regular-ngon" and i == 0 else float(a) for i, a in enumerate(args)]
    poly = BUILTINS[key](*vals)
    return poly


def load_polygon(ref: str) -> CurvilinearPolygon:
    """A built-in name or a path to a YAML/JSON document with a ``sides`` list."""
    import os

    if os.path.exists(ref):
        import yaml

        with open(ref, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        stem = os.path.splitext(os.path.basename(ref))[0]
        if isinstance(doc, dict):
            return build_polygon(doc, name=str(doc.get("name") or stem))
        return build_polygon(doc, name=stem)
    return polygon_by_name(ref)


# ---------------------------------------------------------------------------
# truncated sectors


@dataclass(frozen=True)
class TruncatedSector:
    theta: float
    r: float

    def __post_init__(self):
        if not 0.0 < self.theta:
            raise ValueError("half-angle must be positive")
        if self.theta >= 0.5 * math.pi:
            raise ObtuseHalfAngle("truncated sector needs a half-angle below pi/2")
        if not self.r > 0:
            raise ValueError("radius must be positive")

    @property
    def O(self) -> np.ndarray:
        return np.zeros(2)

    @property
    def A_plus(self) -> np.ndarray:
        return self.r * np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def A_minus(self) -> np.ndarray:
        return self.r * np.array([math.cos(self.theta), -math.sin(self.theta)])

    @property
    def B(self) -> np.ndarray:
        return np.array([self.r / math.cos(self.theta), 0.0])

    def corners(self) -> np.ndarray:
        return np.array([self.O, self.A_minus, self.B, self.A_plus])

    def area(self) -> float:
        return self.r**2 * math.tan(self.theta)

    def region(self) -> Region:
        """Counterclockwise O -> A- -> B -> A+ -> O; the two sides through O form the star part."""
        O, Am, B, Ap = self.O, self.A_minus, self.B, self.A_plus
        return Region(
            (
                BoundaryPiece.segment(O, Am, STAR, "OA-"),
                BoundaryPiece.segment(Am, B, EXT, "A-B"),
                BoundaryPiece.segment(B, Ap, EXT, "BA+"),
                BoundaryPiece.segment(Ap, O, STAR, "A+O"),
            ),
            f"sector({self.theta:.12g},{self.r:.12g})",
        )


def truncated_sector(theta: float, r: float) -> TruncatedSector:
    return TruncatedSector(float(theta), float(r))


# ---------------------------------------------------------------------------
# vertex neighbourhoods


@dataclass(frozen=True)
class Germ:
    """A side near a vertex, parametrized by arc length s >= 0 away from the vertex.

    ``normal`` is the outer normal of the domain and ``curvature`` k satisfies
    normal' = k * tangent.
    """

    point: Callable
    tangent: Callable
    normal: Callable
    curvature: Callable
    length: float

    @classmethod
    def outgoing(cls, side: SideCurve) -> "Germ":
        return cls(side.point, side.tangent, side.normal, side.curvature, side.length)

    @classmethod
    def incoming(cls, side: SideCurve) -> "Germ":
        L = side.length
        return cls(
            lambda s: side.point(L - np.asarray(s, dtype=float)),
            lambda s: -side.tangent(L - np.asarray(s, dtype=float)),
            lambda s: side.normal(L - np.asarray(s, dtype=float)),
            lambda s: side.curvature(L - np.asarray(s, dtype=float)),
            L,
        )


@dataclass(frozen=True)
class BisectorPoint:
    Y: np.ndarray
    lam_plus: float
    lam_minus: float
    iterations: int


def bisector_point(
    germ_minus: Germ,
    germ_plus: Germ,
    t: float,
    theta: float | None = None,
    damping: float = 0.5,
    max_iter: int = 50,
    tol: float = 1e-14,
) -> BisectorPoint:
    """Point at distance t from both sides whose perpendicular feet are gamma_pm(lambda_pm).

    Solves Phi_+(s+, t) = Phi_-(s-, t), Phi(s, t) = gamma(s) - t*nu(s), by damped
    Newton from s = t*cot(theta); steps are halved until the residual drops.
    """
    if theta is None:
        tp, tm = germ_plus.tangent(0.0), germ_minus.tangent(0.0)
        theta = 0.5 * math.acos(max(-1.0, min(1.0, float(np.dot(tp, tm)))))
    if not 0.0 < theta < 0.5 * math.pi:
        raise NoConvergence("bisector point is only defined at convex vertices")
    if t == 0.0:
        return BisectorPoint(np.asarray(germ_plus.point(0.0), dtype=float), 0.0, 0.0, 0)

    def phi(g: Germ, s):
        return np.asarray(g.point(s), dtype=float) - t * np.asarray(g.normal(s), dtype=float)

    def resid(x):
        return phi(germ_plus, x[0]) - phi(germ_minus, x[1])

    x = np.full(2, t / math.tan(theta))
    r = resid(x)
    scale = max(t, 1e-300)
    for it in range(1, max_iter + 1):
        jp = (1.0 - t * float(germ_plus.curvature(x[0]))) * np.asarray(germ_plus.tangent(x[0]), dtype=float)
        jm = -(1.0 - t * float(germ_minus.curvature(x[1]))) * np.asarray(germ_minus.tangent(x[1]), dtype=float)
        J = np.column_stack([jp, jm])
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Jacobian in bisector iteration") from exc
        step = 1.0
        norm = float(np.linalg.norm(r))
        while True:
            xn = x + step * dx
            if xn[0] < 0 or xn[1] < 0 or xn[0] > germ_plus.length or xn[1] > germ_minus.length:
                rn_norm = math.inf
            else:
                rn = resid(xn)
                rn_norm = float(np.linalg.norm(rn))
            if rn_norm < norm or rn_norm <= tol * scale or step < 1e-6:
                break
            step *= damping
        if not math.isfinite(rn_norm):
            raise NoConvergence(f"bisector iteration left the sides at t={t:g}")
        x, r = xn, rn
        if rn_norm <= tol * scale or float(np.linalg.norm(step * dx)) <= 1e-15 * max(1.0, float(np.abs(x).max())):
            return BisectorPoint(phi(germ_plus, x[0]), float(x[0]), float(x[1]), it)
    raise NoConvergence(f"bisector iteration did not converge at t={t:g}")


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class VertexPiece:
    index: int
    convex: bool
    region: Region
    Y: np.ndarray | None
    lam_plus: float
    lam_minus: float


@dataclass(frozen=True)
class Decomposition:
    polygon: CurvilinearPolygon
    delta: float
    vertex_pieces: tuple[VertexPiece, ...]
    side_pieces: tuple[Region, ...]
    core: Region
    lam_plus: np.ndarray  # along side j at its start (vertex j)
    lam_minus: np.ndarray  # along side j-1 at its end (vertex j)

    @property
    def intervals(self) -> list[tuple[float, float]]:
        L = self.polygon.lengths
        m = len(L)
        return [(float(self.lam_plus[j]), float(L[j] - self.lam_minus[(j + 1) % m])) for j in range(m)]

    def pieces(self) -> list[tuple[str, Region]]:
        out = [(f"V{v.index}", v.region) for v in self.vertex_pieces]
        out += [(f"W{j}", w) for j, w in enumerate(self.side_pieces)]
        out.append(("core", self.core))
        return out

    def total_area(self) -> float:
        return float(sum(r.area() for _, r in self.pieces()))

    def star_length(self) -> float:
        return float(sum(v.region.partition_length(STAR) for v in self.vertex_pieces))

    def ext_hausdorff(self, samples: int = 64) -> float:
        """Hausdorff distance between the ext parts of vertex pieces and of side pieces."""

        def pts(regions):
            out = [p.sample(samples) for r in regions for p in r.pieces if p.partition == EXT]
            return np.concatenate(out) if out else np.zeros((0, 2))

        a = pts([v.region for v in self.vertex_pieces])
        b = pts(self.side_pieces)
        if len(a) == 0 and len(b) == 0:
            return 0.0
        # both sets consist of straight segments sampled at the same rate
        da, _ = cKDTree(b).query(a)
        db, _ = cKDTree(a).query(b)
        return float(max(da.max(), db.max()))


def decompose(poly: CurvilinearPolygon, delta: float) -> Decomposition:
    """Vertex neighbourhoods V_j, side strips W_j = Phi_j(I_j x (0, delta)) and the core."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    sides = poly.sides
    m = len(sides)
    hmax = max(s.max_abs_curvature() for s in sides)
    if 1.0 - delta * hmax <= 0.0:
        raise DeltaTooLarge(f"delta={delta:g} exceeds the curvature radius 1/{hmax:g}")
    lam_p = np.zeros(m)
    lam_m = np.zeros(m)
    ys: list[np.ndarray | None] = [None] * m
    for j in range(m):
        th = float(poly.half_angles[j])
        if th < 0.5 * math.pi:
            try:
                bp = bisector_point(Germ.incoming(sides[j - 1]), Germ.outgoing(sides[j]), delta, th)
            except NoConvergence as exc:
                raise DeltaTooLarge(f"vertex {j}: {exc}") from exc
            lam_p[j], lam_m[j], ys[j] = bp.lam_plus, bp.lam_minus, bp.Y
    for j in range(m):
        a, b = lam_p[j], sides[j].length - lam_m[(j + 1) % m]
        if not a < b:
            raise DeltaTooLarge(f"side {j}: vertex neighbourhoods overlap (I = ({a:.4g}, {b:.4g}))")

    vpieces = []
    for j in range(m):
        th = float(poly.half_angles[j])
        A = poly.vertices[j]
        prev, cur = sides[j - 1], sides[j]
        lab = f"V{j}"
        if th < 0.5 * math.pi:
            Ap = cur.point(lam_p[j])
            Am = prev.point(prev.length - lam_m[j])
            reg = Region(
                (
                    BoundaryPiece.from_side(cur, 0.0, lam_p[j], STAR, lab),
                    BoundaryPiece.segment(Ap, ys[j], EXT, lab),
                    BoundaryPiece.segment(ys[j], Am, EXT, lab),
                    BoundaryPiece.from_side(prev, prev.length - lam_m[j], prev.length, STAR, lab),
                ),
                lab,
            )
            vpieces.append(VertexPiece(j, True, reg, np.asarray(ys[j]), float(lam_p[j]), float(lam_m[j])))
        else:
            n0 = -cur.normal(0.0)
            phi0 = math.atan2(n0[1], n0[0])
            sweep = 2.0 * th - math.pi
            reg = Region(
                (
                    BoundaryPiece.segment(A, A + delta * n0, EXT, lab),
                    BoundaryPiece.circular(A, delta, phi0, sweep, OUT, lab),
                    BoundaryPiece.segment(A - delta * prev.normal(prev.length), A, EXT, lab),
                ),
                lab,
            )
            vpieces.append(VertexPiece(j, False, reg, None, 0.0, 0.0))

    wpieces = []
    core_pieces = []
    for j in range(m):
        side = sides[j]
        a, b = float(lam_p[j]), float(side.length - lam_m[(j + 1) % m])
        lab = f"W{j}"
        pa, pb = side.point(a), side.point(b)
        qa, qb = pa - delta * side.normal(a), pb - delta * side.normal(b)
        wpieces.append(
            Region(
                (
                    BoundaryPiece.from_side(side, a, b, STAR, lab),
                    BoundaryPiece.segment(pb, qb, EXT, lab),
                    BoundaryPiece.from_side(side, b, a, OUT, lab, offset=delta),
                    BoundaryPiece.segment(qa, pa, EXT, lab),
                ),
                lab,
            )
        )
        core_pieces.append(BoundaryPiece.from_side(side, a, b, OUT, "core", offset=delta))
        k = (j + 1) % m
        if poly.half_angles[k] >= 0.5 * math.pi:
            A = poly.vertices[k]
            n_end = -side.normal(side.length)
            phi_a = math.atan2(n_end[1], n_end[0])
            core_pieces.append(
                BoundaryPiece.circular(A, delta, phi_a, -(2.0 * poly.half_angles[k] - math.pi), OUT, "core")
            )
    core = Region(tuple(core_pieces), "core")
    dec = Decomposition(poly, float(delta), tuple(vpieces), tuple(wpieces), core, lam_p, lam_m)
    for name, reg in dec.pieces():
        if reg.area() <= 0.0 or not reg.is_simple():
            raise DeltaTooLarge(f"piece {name} is degenerate at delta={delta:g}")
    return dec
