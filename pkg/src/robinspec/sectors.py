"""Robin Laplacians on truncated sectors: spectra, corner energies and the non-resonance test.

A truncated sector of half-angle theta and radius r carries the Robin
condition on the two sides through the vertex O; the exterior cut gets a
Dirichlet, Neumann or Robin condition.  By dilation x -> alpha x the spectrum
at (alpha, r) equals alpha^2 times the spectrum at (1, alpha r), so by default
every computation runs at alpha = 1.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CountUnstable, NegativeGap
from .fem2d import extrapolated_eigs, lowest_eigs, assemble
from .geometry import truncated_sector
from .mesh import Grading, triangulate
from .model1d import EndCondition, IntervalOperator, interval_eigs

_EXT = {"d": "dirichlet", "dirichlet": "dirichlet", "n": "neumann", "neumann": "neumann", "r": "robin", "robin": "robin"}


@dataclass(frozen=True)
class SectorSettings:
    """Mesh and solver settings for sector runs (in units where alpha = 1)."""

    hb_factor: float = 0.15  # boundary-layer edge length, times sin(theta)
    layer_factor: float = 4.0  # layer width
    interior_fraction: float = 0.125  # interior edge length as a fraction of r
    interior_max: float = 2.0
    growth: float = 0.25
    corner_factor: float = 0.5
    corner_rings: int = 4
    corner_radius: float = 2.0
    refinements: int = 1
    use_scaling: bool = True
    extrapolate: bool = True
    seed: int = 0

    def grading(self, theta: float, alpha: float) -> Grading:
        s = math.sin(theta)
        return Grading(
            corner_factor=self.corner_factor,
            corner_rings=self.corner_rings,
            corner_radius=self.corner_radius / alpha,
            layer_width=self.layer_factor / alpha,
            h_boundary=self.hb_factor * min(1.0, s) / alpha,
            growth=self.growth,
        )

    def interior_h(self, r: float, alpha: float) -> float:
        return min(self.interior_fraction * r, self.interior_max / alpha)


DEFAULT_SETTINGS = SectorSettings()


@dataclass(frozen=True)
class SectorSpectrumRequest:
    theta: float
    alpha: float
    r: float
    ext_bc: str = "neumann"
    n: int = 1

    def __post_init__(self):
        if not 0.0 < self.theta < 0.5 * math.pi:
            raise ValueError("sector half-angle must lie in (0, pi/2)")
        if not self.alpha > 0 or not self.r > 0:
            raise ValueError("alpha and r must be positive")
        key = str(self.ext_bc).strip().lower()
        if key not in _EXT:
            raise ValueError(f"exterior condition must be D, N or R, got {self.ext_bc!r}")
        object.__setattr__(self, "ext_bc", _EXT[key])
        if self.n < 1:
            raise ValueError("n must be at least 1")

    @property
    def large_regime(self) -> bool:
        return self.alpha * self.r >= 10.0


@dataclass(frozen=True, eq=False)
class SectorSpectrum:
    request: SectorSpectrumRequest
    values: np.ndarray
    budget: np.ndarray  # two-level error estimate (zeros without extrapolation)
    meta: dict = field(default_factory=dict)


def sector_eigs(req: SectorSpectrumRequest, settings: SectorSettings | None = None, cache_dir=None) -> SectorSpectrum:
    """Lowest eigenvalues of the truncated-sector operator with the requested exterior condition."""
    st = settings or DEFAULT_SETTINGS
    if st.use_scaling:
        a_run, r_run, scale = 1.0, req.alpha * req.r, req.alpha**2
    else:
        a_run, r_run, scale = req.alpha, req.r, 1.0
    sector = truncated_sector(req.theta, r_run)
    region = sector.region()
    bc = {"star": "robin", "ext": req.ext_bc}
    grading = st.grading(req.theta, a_run)
    mesh = triangulate(region, st.interior_h(r_run, a_run), grading, bc, cache_dir=cache_dir)
    shift = -1.5 * a_run**2 / math.sin(req.theta) ** 2
    meta = {
        "theta": req.theta, "alpha": req.alpha, "r": req.r, "ext": req.ext_bc,
        "alpha_run": a_run, "r_run": r_run, "nodes": mesh.n_nodes, "grading": grading.as_dict(),
        "h": mesh.h, "settings": st.__dict__.copy(), "mesh_hash": mesh.meta.get("key", ""),
    }
    if req.ext_bc == "robin":
        # with a Robin cut, B (half-angle pi/2 - theta) and A+- (right angles) are attractive corners too
        shift = -1.5 * a_run**2 * max(1.0 / math.sin(req.theta) ** 2, 1.0 / math.cos(req.theta) ** 2, 2.0)
    if st.extrapolate:
        ex = extrapolated_eigs(mesh, a_run, req.n, refinements=st.refinements, shift_hint=shift, seed=st.seed)
        meta["levels"] = [lv.values.tolist() for lv in ex.levels]
        meta["dofs"] = list(ex.n_nodes)
        return SectorSpectrum(req, scale * ex.values, scale * ex.budget, meta)
    sp = lowest_eigs(assemble(mesh), a_run, req.n, shift_hint=shift, seed=st.seed, return_vectors=False)
    return SectorSpectrum(req, scale * sp.values, np.zeros(req.n), meta)


def square_separable_oracle(r: float, alpha: float, n: int) -> np.ndarray:
    """Sorted sums mu_i + mu_j of the Robin(alpha)-Neumann interval (0, r) (the sector at theta = pi/4)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    op = IntervalOperator(float(r), EndCondition.robin(alpha), EndCondition.neumann())
    mu = interval_eigs(op, n)
    sums = np.sort((mu[:, None] + mu[None, :]).ravel(), kind="stable")
    return sums[:n]


# ---------------------------------------------------------------------------
# corner energies


@dataclass(frozen=True)
class CornerData:
    theta: float
    kappa: int
    energies: np.ndarray  # E_1 <= ... <= E_kappa (alpha = 1 units)
    uncertainty: np.ndarray
    counts: dict = field(default_factory=dict)


_CORNER_CACHE: dict[tuple, CornerData] = {}
_CORNER_LOCK = threading.Lock()


def _count_below(values: np.ndarray, level: float) -> int:
    return int(np.sum(values < level))


def corner_data(
    theta: float,
    settings: SectorSettings | None = None,
    radii: tuple[float, ...] = (20.0, 40.0),
    margin: float = 0.05,
    cache_dir=None,
) -> CornerData:
    """kappa(theta) and the discrete energies of the infinite sector, from truncated Neumann/Dirichlet runs."""
    if not 0.0 < theta < math.pi:
        raise ValueError("half-angle must lie in (0, pi)")
    if theta >= 0.5 * math.pi:
        return CornerData(float(theta), 0, np.zeros(0), np.zeros(0), {})
    st = settings or DEFAULT_SETTINGS
    key = (round(float(theta), 12), st, tuple(radii), margin)
    with _CORNER_LOCK:
        if key in _CORNER_CACHE:
            return _CORNER_CACHE[key]
    level = -1.0 - margin
    counts: dict[str, int] = {}
    runs: dict[tuple, SectorSpectrum] = {}
    for r in radii:
        for ext in ("neumann", "dirichlet"):
            n = 3
            while True:
                sp = sector_eigs(SectorSpectrumRequest(theta, 1.0, r, ext, n), st, cache_dir)
                c = _count_below(sp.values, level)
                if c < n:
                    break
                n *= 2
            counts[f"{ext[0].upper()}{r:g}"] = c
            runs[(r, ext)] = sp
    distinct = set(counts.values())
    if len(distinct) != 1:
        raise CountUnstable(f"eigenvalue counts below {level} disagree for theta={theta:.6g}: {counts}", counts)
    kappa = distinct.pop()
    rmax = max(radii)
    d = runs[(rmax, "dirichlet")].values[:kappa]
    nn = runs[(rmax, "neumann")].values[:kappa]
    out = CornerData(float(theta), kappa, d.copy(), np.abs(d - nn) + runs[(rmax, "dirichlet")].budget[:kappa], counts)
    with _CORNER_LOCK:
        _CORNER_CACHE[key] = out
    return out


# ---------------------------------------------------------------------------
# non-resonance


@dataclass(frozen=True)
class NonresonanceResult:
    theta: float
    kappa: int
    verdict: str  # nonresonant | resonant | inconclusive
    C_fit: float
    p_fit: float
    r_squared: float
    gap_curve: list  # rows (r, g(r), budget, used_in_fit)
    note: str = "resonant/inconclusive thresholds are heuristic"

    def as_record(self) -> dict:
        return {
            "theta": self.theta, "kappa": self.kappa, "verdict": self.verdict, "C_fit": self.C_fit,
            "p_fit": self.p_fit, "r_squared": self.r_squared, "note": self.note,
            "gap_curve": [list(map(float, row[:3])) + [bool(row[3])] for row in self.gap_curve],
        }


def fit_power_law(r: np.ndarray, g: np.ndarray) -> tuple[float, float, float]:
    """Least-squares fit g = C r^-p on log-log axes; returns (C, p, R^2)."""
    x, y = np.log(np.asarray(r, dtype=float)), np.log(np.asarray(g, dtype=float))
    A = np.c_[np.ones_like(x), -x]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(math.exp(coef[0])), float(coef[1]), r2


def nonresonance(
    theta: float,
    r_grid,
    margin: float = 0.05,
    settings: SectorSettings | None = None,
    kappa: int | None = None,
    cache_dir=None,
) -> NonresonanceResult:
    """Fit g(r) = E_{kappa+1}(N^r_theta,1) + 1 to C r^-p and classify the half-angle."""
    if not 0.0 < theta < 0.5 * math.pi:
        raise ValueError("half-angle must lie in (0, pi/2)")
    rs = np.asarray(sorted(float(r) for r in r_grid))
    if len(rs) < 4 or rs.max() < 20.0:
        raise ValueError("r_grid needs at least 4 radii with max >= 20")
    st = settings or DEFAULT_SETTINGS
    if kappa is None:
        kappa = corner_data(theta, st, margin=margin, cache_dir=cache_dir).kappa
    rows = []
    for r in rs:
        sp = sector_eigs(SectorSpectrumRequest(theta, 1.0, r, "neumann", kappa + 1), st, cache_dir)
        g = float(sp.values[kappa] + 1.0)
        err = float(sp.budget[kappa])
        if g < -max(3.0 * err, 1e-8):
            raise NegativeGap(f"g({r:g}) = {g:.3e} < 0 at theta={theta:.6g}; kappa={kappa} is probably miscounted",
                              {"r": float(r), "g": g, "budget": err, "kappa": kappa})
        rows.append([float(r), g, err, g > 10.0 * err and g > 0])
    use = np.array([row[3] for row in rows])
    if use.sum() < 3:
        return NonresonanceResult(float(theta), kappa, "inconclusive", math.nan, math.nan, math.nan, rows,
                                  "gap below the FEM error on most radii; heuristic thresholds")
    C, p, r2 = fit_power_law(rs[use], np.array([row[1] for row in rows])[use])
    if 1.5 <= p <= 2.5 and C > 0 and r2 >= 0.99:
        verdict = "nonresonant"
    elif p > 3.0:
        verdict = "resonant"
    else:
        verdict = "inconclusive"
    return NonresonanceResult(float(theta), kappa, verdict, C, p, r2, rows)


def clear_corner_cache() -> None:
    with _CORNER_LOCK:
        _CORNER_CACHE.clear()
