"""Asymptotic eigenvalue predictions for Robin Laplacians on (curvilinear) polygons.

The first K eigenvalues come from the convex corners (sector energies times
alpha^2); the next ones are -alpha^2 plus eigenvalues of one-dimensional
effective operators on the sides:

* thm1 (straight sides):           -a^2 + E_n(+_j D_j)
* thm2 (max curvature inside sides): -a^2 + E_n(+_{j in J*} (D_j - a H_j)), N-variant alongside
* thm3 (constant curvatures):      -a^2 - H* a - H*^2/2 + E_n(+_{j: H_j = H*} D_j)

All three need the convex corners to be non-resonant; that hypothesis is an
explicit input and is carried in the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import FormulaInapplicable
from .geometry import CurvilinearPolygon
from .model1d import EndCondition, IntervalOperator, direct_sum_eigs, schrodinger_eigs
from .sectors import SectorSettings, corner_data

REMAINDER = {"thm1": "O(log(alpha)/sqrt(alpha))", "thm2": "O(1)", "thm3": "O(log(alpha)/sqrt(alpha))"}
CURVATURE_MARGIN = 1e-6
_PI_6 = math.pi / 6.0


@dataclass(frozen=True)
class CornerSpectrum:
    K: int
    energies: np.ndarray  # sorted, alpha = 1 units
    vertices: np.ndarray  # source vertex of each energy
    index: np.ndarray  # n within the vertex (1-based)
    uncertainty: np.ndarray
    source: str  # "formula" or "numeric"


def corner_spectrum(
    poly: CurvilinearPolygon,
    mode: str = "auto",
    settings: SectorSettings | None = None,
    cache_dir=None,
) -> CornerSpectrum:
    """Merged discrete sector energies over convex vertices (ties by vertex index).

    mode="numeric" computes every sector through truncated-sector runs;
    "formula" uses kappa = 1 and E_1 = -1/sin^2(theta), valid for theta in
    [pi/6, pi/2); "auto" uses the formula there and numerics elsewhere.
    """
    if mode not in ("auto", "numeric", "formula"):
        raise ValueError("mode must be auto, numeric or formula")
    vals, verts, idx, unc = [], [], [], []
    sources = set()
    for j, th in enumerate(poly.half_angles):
        th = float(th)
        if th >= 0.5 * math.pi:
            continue
        closed_form = th >= _PI_6 - 1e-12
        if mode == "formula" and not closed_form:
            raise FormulaInapplicable(f"vertex {j}: no closed form for the sector energies at theta={th:.6g} < pi/6")
        if mode == "formula" or (mode == "auto" and closed_form):
            e, u = np.array([-1.0 / math.sin(th) ** 2]), np.zeros(1)
            sources.add("formula")
        else:
            cd = corner_data(th, settings, cache_dir=cache_dir)
            e, u = cd.energies, cd.uncertainty
            sources.add("numeric")
        for k, (ev, uv) in enumerate(zip(e, u), start=1):
            vals.append(float(ev))
            verts.append(j)
            idx.append(k)
            unc.append(float(uv))
    order = sorted(range(len(vals)), key=lambda i: (vals[i], verts[i], idx[i]))
    pick = lambda seq, dt=float: np.array([seq[i] for i in order], dtype=dt)
    src = "+".join(sorted(sources)) if sources else "none"
    return CornerSpectrum(len(vals), pick(vals), pick(verts, int), pick(idx, int), pick(unc), src)


@dataclass(frozen=True)
class CornerLevel:
    value: float
    vertex: int
    n: int


@dataclass(frozen=True)
class SideLevel:
    value: float
    formula: str
    sides: tuple[int, ...]  # J* used by the formula
    n: int  # index in the effective direct sum
    side: int  # summand that produced this level
    effective: float  # E_n of the effective operator


@dataclass(frozen=True)
class Prediction:
    alpha: float
    formula: str
    corner_levels: tuple[CornerLevel, ...]
    side_levels: tuple[SideLevel, ...]
    remainder: str
    hypothesis: str
    terms: dict = field(default_factory=dict)
    n_variant: tuple[float, ...] | None = None  # thm2 with Neumann ends

    @property
    def K(self) -> int:
        return len(self.corner_levels)

    def levels(self) -> np.ndarray:
        return np.array([c.value for c in self.corner_levels] + [s.value for s in self.side_levels])

    def side_values(self) -> np.ndarray:
        return np.array([s.value for s in self.side_levels])

    def variant_gap(self) -> np.ndarray | None:
        if self.n_variant is None:
            return None
        return self.side_values() - np.asarray(self.n_variant)


def _hypothesis(poly: CurvilinearPolygon, attestation) -> str:
    convex = [int(j) for j in poly.convex_vertices]
    if not convex:
        return "corners non-resonant (no convex vertices)"
    if isinstance(attestation, Mapping):
        for j in convex:
            verdict = attestation.get(j, attestation.get(str(j)))
            if verdict is None:
                raise FormulaInapplicable(f"vertex {j}: no non-resonance verdict supplied")
            if str(verdict) != "nonresonant":
                raise FormulaInapplicable(f"vertex {j}: verdict {verdict!r}, theorem needs a non-resonant corner")
        return "corners non-resonant (verified)"
    if attestation == "asserted":
        if all(poly.half_angles[j] >= math.pi / 4 - 1e-12 for j in convex):
            return "corners non-resonant (verified: all half-angles in [pi/4, pi/2))"
        return "corners non-resonant (asserted)"
    raise ValueError("attestation must be 'asserted' or a mapping vertex -> verdict")


def _curvature_profile(poly: CurvilinearPolygon, samples: int = 2001):
    prof = []
    for side in poly.sides:
        s = np.linspace(0.0, side.length, samples)
        prof.append(np.asarray(side.curvature(s), dtype=float))
    return prof


def predict(
    poly: CurvilinearPolygon,
    alpha: float,
    n_max: int,
    formula: str = "thm1",
    attestation="asserted",
    corners: CornerSpectrum | None = None,
    corner_mode: str = "auto",
) -> Prediction:
    """Corner levels E_n alpha^2 and the first ``n_max`` side levels of the chosen formula."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if formula not in REMAINDER:
        raise ValueError("formula must be thm1, thm2 or thm3")
    alpha = float(alpha)
    m = poly.n_sides
    terms: dict = {"-alpha^2": -alpha**2}
    n_variant = None
    if formula == "thm1":
        if not poly.is_straight:
            bad = [j for j, s in enumerate(poly.sides) if s.kind != "straight"]
            raise FormulaInapplicable(f"thm1 needs straight sides; sides {bad} are curved")
        J = tuple(range(m))
        ops = [IntervalOperator(poly.sides[j].length, EndCondition.dirichlet(), EndCondition.dirichlet(), label=f"D{j}")
               for j in J]
        ds = direct_sum_eigs(ops, n_max)
        eff, src = ds.values, ds.sources
        base = -alpha**2
    elif formula == "thm3":
        if not poly.has_constant_curvature:
            bad = [j for j, s in enumerate(poly.sides) if s.kind not in ("straight", "arc")]
            raise FormulaInapplicable(f"thm3 needs constant curvature; sides {bad} are general curves")
        H = np.array([float(s.curvature(0.0)) for s in poly.sides])
        hstar = float(H.max())
        J = tuple(int(j) for j in np.flatnonzero(np.abs(H - hstar) <= 1e-12 * max(1.0, abs(hstar))))
        ops = [IntervalOperator(poly.sides[j].length, EndCondition.dirichlet(), EndCondition.dirichlet(), label=f"D{j}")
               for j in J]
        ds = direct_sum_eigs(ops, n_max)
        eff, src = ds.values, np.array([J[k] for k in ds.sources])
        base = -alpha**2 - hstar * alpha - 0.5 * hstar**2
        terms.update({"-H*alpha": -hstar * alpha, "-H*^2/2": -0.5 * hstar**2, "H*": hstar})
    else:
        prof = _curvature_profile(poly)
        hmax_side = np.array([p.max() for p in prof])
        hstar = float(hmax_side.max())
        for j, p in enumerate(prof):
            for end, val in (("start", p[0]), ("end", p[-1])):
                if val >= hstar - CURVATURE_MARGIN * max(1.0, abs(hstar)):
                    raise FormulaInapplicable(f"thm2 needs the maximal curvature inside the sides; side {j} attains it at its {end}")
        J = tuple(int(j) for j in np.flatnonzero(hmax_side >= hstar - CURVATURE_MARGIN * max(1.0, abs(hstar))))
        vals_d, vals_n, srcs = [], [], []
        for j in J:
            side = poly.sides[j]
            vd = schrodinger_eigs(side.length, alpha, side.curvature, "D", n_max)
            vn = schrodinger_eigs(side.length, alpha, side.curvature, "N", n_max)
            vals_d.extend(vd)
            vals_n.extend(vn)
            srcs.extend([j] * len(vd))
        order = sorted(range(len(vals_d)), key=lambda i: (vals_d[i], srcs[i]))[:n_max]
        eff = np.array([vals_d[i] for i in order])
        src = np.array([srcs[i] for i in order])
        n_eff = np.sort(np.array(vals_n), kind="stable")[:n_max]
        base = -alpha**2
        n_variant = tuple(float(base + v) for v in n_eff)
        terms.update({"H*": hstar})
    terms["E_n(effective)"] = [float(v) for v in eff]
    terms["J*"] = list(J)
    side_levels = tuple(
        SideLevel(float(base + v), formula, J, k + 1, int(s), float(v)) for k, (v, s) in enumerate(zip(eff, src))
    )
    cs = corners if corners is not None else corner_spectrum(poly, corner_mode)
    corner_levels = tuple(
        CornerLevel(float(e * alpha**2), int(v), int(k)) for e, v, k in zip(cs.energies, cs.vertices, cs.index)
    )
    terms["corner_source"] = cs.source
    return Prediction(alpha, formula, corner_levels, side_levels, REMAINDER[formula],
                      _hypothesis(poly, attestation), terms, n_variant)


@dataclass(frozen=True)
class McCartinReference:
    side_length: float
    alpha: float
    corner_levels: np.ndarray
    z: np.ndarray
    side_levels: np.ndarray


def mccartin_multiset(side_length: float, n_max: int) -> np.ndarray:
    """First n_max elements of {(2 pi m / (3 l))^2 : m in Z} in non-decreasing order."""
    c = (2.0 * math.pi / (3.0 * side_length)) ** 2
    out = [0.0]
    m = 1
    while len(out) < n_max:
        out += [c * m * m, c * m * m]
        m += 1
    return np.array(out[:n_max])


def mccartin_reference(side_length: float, alpha: float, n_max: int) -> McCartinReference:
    """Equilateral-triangle levels: -4 alpha^2 three times, then -alpha^2 + z_n.

    z_n is scaled from unit side length by 1/l^2 (dilation of the boundary circle of length 3 l).
    """
    if not side_length > 0:
        raise ValueError("side length must be positive")
    z = mccartin_multiset(side_length, n_max)
    return McCartinReference(float(side_length), float(alpha), np.full(3, -4.0 * alpha**2), z, -alpha**2 + z)
