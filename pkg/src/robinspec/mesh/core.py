"""Graded, boundary-tagged triangulations of regions and nested red refinement."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
import shapely
from scipy import ndimage
from scipy.spatial import cKDTree

from ..errors import EmptyDomain, QualityFailure
from ..geometry import Region
from ._backend import KERNEL_BACKEND, kernel

ROBIN, NEUMANN, DIRICHLET = 0, 1, 2
TAG_NAMES = ("robin", "neumann", "dirichlet")
_TAG_ALIASES = {
    "r": ROBIN, "robin": ROBIN,
    "n": NEUMANN, "neumann": NEUMANN,
    "d": DIRICHLET, "dirichlet": DIRICHLET,
}
DEFAULT_BC = {"star": "robin", "ext": "neumann", "out": "neumann"}
FORMAT_VERSION = 2
_DEFAULT_CACHE_DIR: str | None = os.environ.get("ROBINSPEC_MESH_CACHE") or None


def set_default_cache_dir(path: str | os.PathLike | None) -> None:
    """Cache directory used by ``triangulate`` when none is passed (None disables caching)."""
    global _DEFAULT_CACHE_DIR
    _DEFAULT_CACHE_DIR = os.fspath(path) if path is not None else None


def tag_code(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        if int(tag) not in (ROBIN, NEUMANN, DIRICHLET):
            raise ValueError(f"unknown boundary tag {tag!r}")
        return int(tag)
    try:
        return _TAG_ALIASES[str(tag).strip().lower()]
    except KeyError:
        raise ValueError(f"unknown boundary tag {tag!r}") from None


@dataclass(frozen=True)
class Grading:
    """Mesh-size controls.

    Edges are at most ``h_boundary`` within ``layer_width`` of Robin edges and
    grow by ``growth`` per unit distance beyond; within distance
    2^-k * corner_radius of a corner the size is at most h * corner_factor^k
    for k <= corner_rings (corner_radius defaults to the region diameter).
    """

    corner_factor: float = 0.5
    corner_rings: int = 6
    corner_radius: float | None = None
    layer_width: float | None = None
    h_boundary: float | None = None
    growth: float = 0.3

    @classmethod
    def for_alpha(cls, alpha: float, h_boundary_factor: float = 0.2, layer_factor: float = 3.0, **kw) -> "Grading":
        return cls(layer_width=layer_factor / alpha, h_boundary=h_boundary_factor / alpha, **kw)

    def as_dict(self) -> dict:
        return {
            "corner_factor": self.corner_factor,
            "corner_rings": self.corner_rings,
            "corner_radius": self.corner_radius,
            "layer_width": self.layer_width,
            "h_boundary": self.h_boundary,
            "growth": self.growth,
        }


NO_GRADING = Grading(corner_rings=0)


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (T, 3), counterclockwise
    edges: np.ndarray  # (E, 2) boundary edges, domain on the left
    edge_tag: np.ndarray  # (E,) ROBIN / NEUMANN / DIRICHLET
    edge_piece: np.ndarray  # (E,) index into region.pieces
    edge_param: np.ndarray  # (E, 2) piece parameters of the end points
    region: Region | None = None
    h: float = math.nan
    h_boundary: float = math.nan
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def edge_label(self) -> np.ndarray:
        labels = np.array([p.label for p in self.region.pieces] if self.region else [""], dtype=object)
        return labels[self.edge_piece] if self.region else np.full(len(self.edges), "", dtype=object)

    @property
    def edge_partition(self) -> np.ndarray:
        parts = np.array([p.partition for p in self.region.pieces], dtype=object)
        return parts[self.edge_piece]

    def edges_with(self, tag) -> np.ndarray:
        return self.edges[self.edge_tag == tag_code(tag)]

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(np.sum(self.triangle_areas()))

    def min_angle(self) -> float:
        """Smallest interior angle in degrees."""
        p = self.nodes[self.triangles]
        out = np.inf
        for k in range(3):
            a, b, c = p[:, k], p[:, (k + 1) % 3], p[:, (k + 2) % 3]
            u, v = b - a, c - a
            cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            out = min(out, float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))).min()))
        return out

    def edge_lengths(self) -> np.ndarray:
        d = self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def with_bc(self, bc: Mapping) -> "Mesh":
        """Same triangulation with boundary tags reassigned from a partition/label mapping."""
        if self.region is None:
            raise ValueError("mesh has no region; cannot map tags")
        tags = _piece_tags(self.region, bc)
        return replace(self, edge_tag=tags[self.edge_piece], meta={**self.meta, "bc": _bc_record(self.region, bc)})

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.nodes, self.triangles, self.edges, self.edge_tag):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------------------
# boundary conditions


def _piece_tags(region: Region, bc: Mapping | None) -> np.ndarray:
    table = dict(DEFAULT_BC)
    if bc:
        table.update({str(k): v for k, v in bc.items()})
    out = []
    for p in region.pieces:
        tag = table.get(p.label, table.get(p.partition))
        if tag is None:
            raise ValueError(f"no boundary condition for piece {p.label!r} ({p.partition})")
        out.append(tag_code(tag))
    return np.asarray(out, dtype=np.int64)


def _bc_record(region: Region, bc: Mapping | None) -> list[str]:
    return [TAG_NAMES[t] for t in _piece_tags(region, bc)]


# ---------------------------------------------------------------------------
# sizing


def _turning_corners(region: Region, tol: float = 1e-3) -> np.ndarray:
    """Piece start points where the boundary tangent jumps."""
    pts = []
    m = len(region.pieces)
    for j, p in enumerate(region.pieces):
        prev = region.pieces[j - 1]
        a = prev.func(np.array([1.0 - 1e-6, 1.0]))
        b = p.func(np.array([0.0, 1e-6]))
        tin, tout = a[1] - a[0], b[1] - b[0]
        tin /= np.hypot(*tin)
        tout /= np.hypot(*tout)
        turn = abs(math.atan2(tin[0] * tout[1] - tin[1] * tout[0], float(np.dot(tin, tout))))
        if turn > tol or m == 1:
            pts.append(b[0])
    return np.asarray(pts, dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class SizingField:
    origin: np.ndarray
    step: np.ndarray
    values: np.ndarray  # (ny, nx)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        ny, nx = self.values.shape
        fx = np.clip((x[:, 0] - self.origin[0]) / self.step[0], 0.0, nx - 1.000001)
        fy = np.clip((x[:, 1] - self.origin[1]) / self.step[1], 0.0, ny - 1.000001)
        i, j = fx.astype(int), fy.astype(int)
        fx, fy = fx - i, fy - j
        v = self.values
        return ((1 - fx) * (1 - fy) * v[j, i] + fx * (1 - fy) * v[j, i + 1]
                + (1 - fx) * fy * v[j + 1, i] + fx * fy * v[j + 1, i + 1])


def _distance_to_pieces(pieces, G: np.ndarray, origin: np.ndarray, spacing: float, shape: tuple[int, int]) -> np.ndarray:
    """Distance from the grid points G (shape ``shape``) to the union of the pieces.

    Straight pieces use exact segment distances (a kd-tree over collinear
    samples degrades badly).  Curved pieces are rasterised and measured with a
    distance transform, to within about one grid spacing.
    """
    d = np.full(len(G), np.inf)
    segs = [np.vstack([p.start, p.end]) for p in pieces if p.straight]
    if segs:
        d = np.minimum(d, shapely.distance(shapely.points(G), shapely.MultiLineString(segs)))
    curved = [p.sample(max(2, int(math.ceil(p.length / (0.25 * spacing))))) for p in pieces if not p.straight]
    if curved:
        S = np.concatenate(curved)
        ny, nx = shape
        ij = np.rint((S - origin) / spacing).astype(int)
        ij[:, 0] = np.clip(ij[:, 0], 0, nx - 1)
        ij[:, 1] = np.clip(ij[:, 1], 0, ny - 1)
        rep = np.zeros((ny, nx, 2))
        empty = np.ones((ny, nx), dtype=bool)
        rep[ij[:, 1], ij[:, 0]] = S  # last sample per cell wins, deterministically
        empty[ij[:, 1], ij[:, 0]] = False
        _, (iy, ix) = ndimage.distance_transform_edt(empty, return_indices=True)
        near = rep[iy.ravel(), ix.ravel()]
        d = np.minimum(d, np.hypot(*(G - near).T))
    return d


def sizing_field(region: Region, h: float, grading: Grading, piece_tags: np.ndarray, max_cells: int = 1024) -> SizingField:
    poly = region.polyline(256)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    diam = float(np.hypot(*(hi - lo)))
    robin = [p for p, t in zip(region.pieces, piece_tags) if t == ROBIN]
    hb = grading.h_boundary
    w = grading.layer_width
    layer = robin and hb is not None and hb < h
    spacing = diam / 256.0
    if layer and w:
        spacing = min(spacing, w / 3.0)
    rc = grading.corner_radius if grading.corner_radius is not None else diam
    if grading.corner_rings > 0:
        spacing = min(spacing, rc * 2.0 ** (-grading.corner_rings) / 4.0)
    spacing = max(spacing, diam / max_cells)
    nx = int(math.ceil((hi[0] - lo[0]) / spacing)) + 3
    ny = int(math.ceil((hi[1] - lo[1]) / spacing)) + 3
    origin = lo - spacing
    gx = origin[0] + spacing * np.arange(nx)
    gy = origin[1] + spacing * np.arange(ny)
    X, Y = np.meshgrid(gx, gy)
    G = np.c_[X.ravel(), Y.ravel()]
    size = np.full(len(G), float(h))
    if layer:
        width = w if w is not None else 0.0
        d = _distance_to_pieces(robin, G, origin, spacing, (ny, nx))
        size = np.minimum(size, hb + grading.growth * np.maximum(0.0, d - width))
    if grading.corner_rings > 0 and grading.corner_factor < 1.0:
        corners = _turning_corners(region)
        if len(corners):
            d, _ = cKDTree(corners).query(G, distance_upper_bound=rc + 2.0 * spacing)
            cf = grading.corner_factor
            expo = -math.log2(cf)
            ratio = np.maximum(d / rc, 2.0 ** (-grading.corner_rings))
            size = np.minimum(size, h * np.maximum(cf ** grading.corner_rings, np.minimum(1.0, ratio**expo)))
    return SizingField(origin, np.array([spacing, spacing]), size.reshape(ny, nx))


def _sample_piece(piece, size: SizingField, min_segments: int) -> np.ndarray:
    """Parameters 0 = u_0 < ... < u_m = 1 with spacing following the sizing field."""
    if piece.straight:
        return np.array([0.0, 1.0])
    u = np.linspace(0.0, 1.0, 4097)
    x = piece.func(u)
    ds = np.hypot(*np.diff(x, axis=0).T)
    hmid = size(0.5 * (x[1:] + x[:-1]))
    cum = np.concatenate([[0.0], np.cumsum(ds / hmid)])
    m = max(min_segments, int(math.ceil(cum[-1])))
    return np.interp(np.linspace(0.0, cum[-1], m + 1), cum, u)


# ---------------------------------------------------------------------------
# triangulation


def _cache_key(region: Region, h: float, grading: Grading, tags: np.ndarray) -> str:
    hsh = hashlib.sha256()
    hsh.update(np.ascontiguousarray(region.polyline(64)).tobytes())
    hsh.update(json.dumps({"h": h, "grading": grading.as_dict(), "tags": tags.tolist(),
                           "partitions": [p.partition for p in region.pieces],
                           "format": FORMAT_VERSION}, sort_keys=True).encode())
    return hsh.hexdigest()


def triangulate(
    region: Region,
    h: float,
    grading: Grading | None = None,
    bc: Mapping | None = None,
    cache_dir: str | os.PathLike | None = None,
    min_angle: float = 20.0,
) -> Mesh:
    """Quality Delaunay triangulation of ``region`` with boundary edges tagged through ``bc``.

    ``bc`` maps partition names ("star", "ext", "out") or piece labels to
    "robin" / "neumann" / "dirichlet"; unspecified pieces use star=robin and
    ext=out=neumann.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    grading = grading if grading is not None else NO_GRADING
    if not region.pieces or abs(region.area(256)) <= 0.0:
        raise EmptyDomain(f"region {region.name!r} has no area")
    tags = _piece_tags(region, bc)
    key = _cache_key(region, h, grading, tags)
    if cache_dir is None:
        cache_dir = _DEFAULT_CACHE_DIR
    if cache_dir is not None:
        cached = load_mesh(os.path.join(os.fspath(cache_dir), key[:24] + ".npz"), region, expect_hash=key)
        if cached is not None:
            return cached

    size = sizing_field(region, h, grading, tags)
    xs, corner, seg_a, seg_b, t0, t1, src_piece = [], [], [], [], [], [], []
    corner_pts = _turning_corners(region)
    offset = 0
    for k, piece in enumerate(region.pieces):
        u = _sample_piece(piece, size, 4)
        pts = piece.func(u)[:-1]
        n = len(pts)
        xs.append(pts)
        flags = np.zeros(n, dtype=np.int32)
        if len(corner_pts) and np.min(np.hypot(*(corner_pts - pts[0]).T)) < 1e-12:
            flags[0] = 1
        corner.append(flags)
        seg_a.append(offset + np.arange(n))
        seg_b.append(offset + np.arange(1, n + 1))
        t0.append(u[:-1])
        t1.append(u[1:])
        src_piece.append(np.full(n, k))
        offset += n
    pts = np.concatenate(xs)
    seg_a = np.concatenate(seg_a)
    seg_b = np.concatenate(seg_b)
    seg_b[-1] = 0
    seg_t0, seg_t1 = np.concatenate(t0), np.concatenate(t1)
    src_piece = np.concatenate(src_piece)

    nodes, tris, seg, src, par = kernel.build(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), np.concatenate(corner),
        seg_a.astype(np.int32), seg_b.astype(np.int32), seg_t0, seg_t1,
        size.origin, size.step, size.values,
    )
    if len(tris) == 0:
        raise EmptyDomain(f"region {region.name!r} produced no triangles")
    piece_of = src_piece[src]
    # snap refinement points on curved pieces back onto the curve
    curved = np.array([not p.straight for p in region.pieces])
    for k in np.flatnonzero(curved):
        sel = piece_of == k
        if not np.any(sel):
            continue
        ids = np.concatenate([seg[sel, 0], seg[sel, 1]])
        us = np.concatenate([par[sel, 0], par[sel, 1]])
        nodes[ids] = region.pieces[k].func(us)

    used = np.zeros(len(nodes), dtype=bool)
    used[tris.ravel()] = True
    if not used.all():
        remap = np.cumsum(used) - 1
        nodes, tris, seg = nodes[used], remap[tris], remap[seg]

    mesh = Mesh(
        nodes=nodes,
        triangles=tris,
        edges=seg,
        edge_tag=tags[piece_of],
        edge_piece=piece_of,
        edge_param=par,
        region=region,
        h=float(h),
        h_boundary=float(grading.h_boundary if grading.h_boundary is not None else h),
        meta={"key": key, "backend": KERNEL_BACKEND, "grading": grading.as_dict(), "bc": _bc_record(region, bc),
              "region": region.name, "level": 0},
    )
    report = validate(mesh, min_angle=None)
    if report["min_signed_area"] <= 0.0:
        raise QualityFailure("snapping curved boundary points inverted a triangle; lower h_boundary")
    if report["min_angle"] < min_angle and _smallest_input_angle(region) >= 2.0 * min_angle:
        raise QualityFailure(f"minimum angle {report['min_angle']:.2f} deg below {min_angle} deg")
    if cache_dir is not None:
        save_mesh(mesh, os.path.join(os.fspath(cache_dir), key[:24] + ".npz"))
    return mesh


def _smallest_input_angle(region: Region) -> float:
    out = 180.0
    for j, p in enumerate(region.pieces):
        prev = region.pieces[j - 1]
        a = prev.func(np.array([1.0 - 1e-6, 1.0]))
        b = p.func(np.array([0.0, 1e-6]))
        u, v = a[0] - a[1], b[1] - b[0]
        c = float(np.dot(u, v) / (np.hypot(*u) * np.hypot(*v)))
        out = min(out, math.degrees(math.acos(max(-1.0, min(1.0, c)))))
    return out


# ---------------------------------------------------------------------------
# refinement


def refine(mesh: Mesh) -> Mesh:
    """Red refinement: every triangle split into four; boundary midpoints on curved pieces are put on the curve."""
    tris = mesh.triangles
    n = len(mesh.nodes)
    all_edges = np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]])
    key = np.sort(all_edges, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    nt = len(tris)
    m0, m1, m2 = n + inv[:nt], n + inv[nt:2 * nt], n + inv[2 * nt:]  # opposite vertices 0, 1, 2
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    new_tris = np.concatenate([
        np.c_[a, m2, m1],
        np.c_[m2, b, m0],
        np.c_[m1, m0, c],
        np.c_[m0, m1, m2],
    ])
    # boundary edges
    bkey = np.sort(mesh.edges, axis=1)
    lookup = {tuple(e): i for i, e in enumerate(uniq.tolist())}
    bmid = n + np.array([lookup[tuple(e)] for e in bkey.tolist()], dtype=np.int64)
    nodes = np.concatenate([mesh.nodes, mids])
    upar = 0.5 * (mesh.edge_param[:, 0] + mesh.edge_param[:, 1])
    if mesh.region is not None:
        for k, piece in enumerate(mesh.region.pieces):
            if piece.straight:
                continue
            sel = mesh.edge_piece == k
            if np.any(sel):
                nodes[bmid[sel]] = piece.func(upar[sel])
    e0, e1 = mesh.edges[:, 0], mesh.edges[:, 1]
    E = len(e0)
    edges = np.empty((2 * E, 2), dtype=np.int64)
    edges[0::2] = np.c_[e0, bmid]
    edges[1::2] = np.c_[bmid, e1]
    param = np.empty((2 * E, 2))
    param[0::2] = np.c_[mesh.edge_param[:, 0], upar]
    param[1::2] = np.c_[upar, mesh.edge_param[:, 1]]
    meta = {**mesh.meta, "level": int(mesh.meta.get("level", 0)) + 1}
    return replace(
        mesh,
        nodes=nodes,
        triangles=new_tris,
        edges=edges,
        edge_tag=np.repeat(mesh.edge_tag, 2),
        edge_piece=np.repeat(mesh.edge_piece, 2),
        edge_param=param,
        h=0.5 * mesh.h,
        h_boundary=0.5 * mesh.h_boundary,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# validation


def validate(mesh: Mesh, min_angle: float | None = 20.0) -> dict:
    """Check conformity, orientation and tagging; raise QualityFailure when ``min_angle`` is given and violated."""
    tris = mesh.triangles
    all_edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(all_edges, axis=0, return_counts=True)
    boundary = uniq[counts == 1]
    bset = {tuple(e) for e in np.sort(mesh.edges, axis=1).tolist()}
    report = {
        "nodes": mesh.n_nodes,
        "triangles": mesh.n_triangles,
        "max_edge_multiplicity": int(counts.max()),
        "boundary_edges_match": bset == {tuple(e) for e in boundary.tolist()} and len(bset) == len(mesh.edges),
        "min_signed_area": float(mesh.triangle_areas().min()),
        "min_angle": mesh.min_angle(),
        "tags_valid": bool(np.all(np.isin(mesh.edge_tag, (ROBIN, NEUMANN, DIRICHLET)))),
    }
    ok = (report["max_edge_multiplicity"] <= 2 and report["boundary_edges_match"]
          and report["min_signed_area"] > 0 and report["tags_valid"])
    report["ok"] = bool(ok)
    if min_angle is not None:
        if not ok:
            raise QualityFailure(f"invalid mesh: {report}")
        if report["min_angle"] < min_angle:
            raise QualityFailure(f"minimum angle {report['min_angle']:.2f} deg below {min_angle} deg")
    return report


# ---------------------------------------------------------------------------
# cache files


def save_mesh(mesh: Mesh, path: str | os.PathLike) -> None:
    """Write node, triangle and tagged edge tables plus the generating-parameter hash (npz)."""
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    meta = {**mesh.meta, "h": mesh.h, "h_boundary": mesh.h_boundary, "format": FORMAT_VERSION}
    tmp = os.fspath(path) + ".tmp.npz"
    np.savez(tmp, nodes=mesh.nodes, triangles=mesh.triangles, edges=mesh.edges, edge_tag=mesh.edge_tag,
             edge_piece=mesh.edge_piece, edge_param=mesh.edge_param,
             meta=np.array(json.dumps(meta, sort_keys=True)))
    os.replace(tmp, path)


def load_mesh(path: str | os.PathLike, region: Region | None = None, expect_hash: str | None = None) -> Mesh | None:
    """Read a cache file; returns None when it is missing or was generated from different parameters."""
    if not os.path.exists(path):
        return None
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if expect_hash is not None and meta.get("key") != expect_hash:
            return None
        return Mesh(
            nodes=z["nodes"], triangles=z["triangles"], edges=z["edges"], edge_tag=z["edge_tag"],
            edge_piece=z["edge_piece"], edge_param=z["edge_param"], region=region,
            h=float(meta.pop("h")), h_boundary=float(meta.pop("h_boundary")), meta=meta,
        )
