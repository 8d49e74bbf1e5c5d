"""Verification experiments: FEM spectra against predictions, bracketing checks and remainder fits.

Tables are written as CSV (header row, comma separated, 17 significant
digits) next to a JSON run manifest with versions, seeds and mesh hashes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BracketViolationBeyondBudget, InsufficientSignal, RobinSpecError
from .fem2d import extrapolated_eigs
from .geometry import CurvilinearPolygon, decompose, load_polygon
from .mesh import KERNEL_BACKEND, Grading, triangulate
from .effective import Prediction, predict

CLUSTER_MARGIN = 0.2


def fmt(x) -> str:
    """17 significant digits, '.' decimal; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def versions() -> dict:
    import scipy
    import shapely

    from . import __version__

    return {
        "robinspec": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "shapely": shapely.__version__,
        "kernel": KERNEL_BACKEND,
    }


def write_manifest(path: str | os.PathLike, payload: dict) -> None:
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"versions": versions(), **payload}, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class MeshSettings:
    """Mesh rules for whole-domain and piece runs; sizes scale with 1/alpha."""

    h: float = 0.1
    hb_factor: float = 0.2
    layer_factor: float = 3.0
    corner_factor: float = 0.5
    corner_rings: int = 6
    corner_radius_factor: float = 3.0
    growth: float = 0.3
    refinements: int = 1

    def grading(self, alpha: float) -> Grading:
        return Grading(
            corner_factor=self.corner_factor,
            corner_rings=self.corner_rings,
            corner_radius=self.corner_radius_factor / alpha,
            layer_width=self.layer_factor / alpha,
            h_boundary=self.hb_factor / alpha,
            growth=self.growth,
        )


@dataclass(frozen=True)
class DeltaRule:
    kind: str = "log"  # fixed | log | power
    value: float = 3.0  # delta for fixed, b for b log(a)/a, c for c a^-k
    exponent: float = 0.5

    def __call__(self, alpha: float) -> float:
        if self.kind == "fixed":
            return float(self.value)
        if self.kind == "log":
            return float(self.value * math.log(alpha) / alpha)
        if self.kind == "power":
            return float(self.value * alpha ** (-self.exponent))
        raise ValueError(f"unknown delta rule {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    polygon: str
    alphas: tuple[float, ...]
    n_max: int = 2
    formula: str = "thm1"
    delta_rule: DeltaRule = DeltaRule()
    mesh: MeshSettings = MeshSettings()
    attestation: str = "asserted"
    corner_mode: str = "auto"
    output: str | None = None
    seed: int = 0
    workers: int = 1
    name: str = "experiment"

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        object.__setattr__(self, "alphas", a)
        if not a or any(x <= 0 for x in a):
            raise ValueError("alpha grid must be non-empty and positive")
        if any(y <= x for x, y in zip(a, a[1:])):
            raise ValueError("alpha grid must be strictly increasing")
        if a[0] * self.delta_rule(a[0]) < 5.0:
            raise ValueError(f"delta rule gives alpha*delta = {a[0] * self.delta_rule(a[0]):.3g} < 5 at alpha={a[0]:g}")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        dr = d.pop("delta_rule", None)
        ms = d.pop("mesh", None)
        if isinstance(dr, dict):
            dr = DeltaRule(**dr)
        if isinstance(ms, dict):
            ms = MeshSettings(**ms)
        if "alphas" in d:
            d["alphas"] = tuple(d["alphas"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: v for k, v in d.items()}
        if dr is not None:
            kw["delta_rule"] = dr
        if ms is not None:
            kw["mesh"] = ms
        return cls(**kw)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        import yaml

        with open(path, encoding="utf-8") as fh:
            d = yaml.safe_load(fh)
        base = os.path.dirname(os.path.abspath(os.fspath(path)))
        cfg = cls.from_dict(d)
        # polygon files are resolved relative to the config file
        cand = os.path.join(base, cfg.polygon)
        if os.path.exists(cand):
            cfg = cls.from_dict({**d, "polygon": cand})
        return cfg

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class Row:
    alpha: float
    k: int
    cluster: str  # corner | side
    E_fem: float
    predicted: float
    gap: float
    budget: float
    residual: float
    mesh_id: str


@dataclass
class ResultTable:
    rows: list[Row]
    fits: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    partial: bool = False

    HEADER = ("alpha", "k", "cluster", "E_fem", "predicted", "gap", "budget", "residual", "mesh_id")

    def sorted(self) -> "ResultTable":
        self.rows.sort(key=lambda r: (r.alpha, r.k))
        return self

    def select(self, k: int) -> list[Row]:
        return [r for r in self.rows if r.k == k]

    def to_csv(self, path=None) -> str:
        return write_csv(path, self.HEADER, [tuple(getattr(r, f) for f in self.HEADER) for r in self.rows])


def _solve_polygon(poly_ref: str, alpha: float, n: int, mesh: MeshSettings, seed: int):
    poly = load_polygon(poly_ref) if isinstance(poly_ref, str) else poly_ref
    m = triangulate(poly.region(), mesh.h, mesh.grading(alpha), {"star": "robin"})
    ex = extrapolated_eigs(m, alpha, n, refinements=mesh.refinements, seed=seed)
    res = np.max([lv.residuals for lv in ex.levels], axis=0)
    return ex.values, ex.budget, res, m.meta["key"][:16], ex.n_nodes


def polygon_eigs(poly, alpha: float, n: int, mesh: MeshSettings | None = None, seed: int = 0):
    """Extrapolated lowest eigenvalues of the Robin Laplacian on a polygon: (values, budget, residual, mesh id, dofs)."""
    return _solve_polygon(poly, float(alpha), n, mesh or MeshSettings(), seed)


def _job(args):
    poly_ref, alpha, n, mesh, seed = args
    try:
        return ("ok",) + _solve_polygon(poly_ref, alpha, n, mesh, seed)
    except RobinSpecError as exc:
        return ("error", f"{type(exc).__name__}: {exc}")


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ResultTable:
    """FEM spectrum per alpha against the configured prediction; corner levels first, then side levels."""
    poly = load_polygon(cfg.polygon)
    preds: dict[float, Prediction] = {a: predict(poly, a, cfg.n_max, cfg.formula, cfg.attestation,
                                                 corner_mode=cfg.corner_mode) for a in cfg.alphas}
    K = preds[cfg.alphas[0]].K
    n = K + cfg.n_max
    jobs = [(cfg.polygon, a, n, cfg.mesh, cfg.seed) for a in cfg.alphas]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    rows: list[Row] = []
    partial = False
    meta: dict = {"polygon": poly.name, "K": K, "formula": cfg.formula, "hypothesis": preds[cfg.alphas[0]].hypothesis,
                  "remainder": preds[cfg.alphas[0]].remainder, "mesh_hashes": {}, "dofs": {}, "errors": {},
                  "cluster_counts": {}}
    for a, res in zip(cfg.alphas, results):
        pred = preds[a].levels()
        if res[0] != "ok":
            partial = True
            meta["errors"][fmt(a)] = res[1]
            for k in range(1, n + 1):
                rows.append(Row(a, k, "corner" if k <= K else "side", math.nan, float(pred[k - 1]), math.nan,
                                math.nan, math.nan, ""))
            continue
        _, vals, budget, resid, mid, dofs = res
        meta["mesh_hashes"][fmt(a)] = mid
        meta["dofs"][fmt(a)] = list(dofs)
        meta["cluster_counts"][fmt(a)] = int(np.sum(vals < -a * a * (1.0 + CLUSTER_MARGIN)))
        for k in range(1, n + 1):
            v = float(vals[k - 1])
            p = float(pred[k - 1])
            rows.append(Row(a, k, "corner" if k <= K else "side", v, p, v - p, float(budget[k - 1]),
                            float(resid[k - 1]), mid))
    table = ResultTable(rows, meta=meta, partial=partial).sorted()
    table.meta["cluster_match"] = all(c == K for c in meta["cluster_counts"].values())
    for k in range(K + 1, n + 1):
        sel = table.select(k)
        try:
            fit = remainder_fit([r.alpha for r in sel], [r.gap for r in sel], [r.budget for r in sel],
                                model="log/sqrt" if cfg.formula != "thm2" else "const")
            table.fits[f"k{k}"] = asdict(fit)
        except InsufficientSignal as exc:
            table.fits[f"k{k}"] = {"status": "insufficient signal", "detail": str(exc)}
    if write and cfg.output:
        out = cfg.output
        table.to_csv(os.path.join(out, f"{cfg.name}.csv"))
        write_manifest(os.path.join(out, f"{cfg.name}.manifest.json"),
                       {"config": cfg.as_dict(), "seed": cfg.seed, "meta": table.meta, "fits": table.fits,
                        "partial": table.partial})
    return table


def audit_monotone(table: ResultTable, tol: float = 0.0) -> dict[int, bool]:
    """Whether each E_k is non-increasing along the alpha grid (allowing ``tol`` plus the budgets)."""
    out = {}
    for k in sorted({r.k for r in table.rows}):
        sel = table.select(k)
        ok = True
        for r0, r1 in zip(sel, sel[1:]):
            if r1.E_fem > r0.E_fem + tol + r0.budget + r1.budget:
                ok = False
        out[k] = ok
    return out


# ---------------------------------------------------------------------------
# remainder fits


MODELS = {
    "log/sqrt": lambda a: np.log(a) / np.sqrt(a),
    "1/alpha": lambda a: 1.0 / a,
    "const": lambda a: np.ones_like(a),
}


@dataclass(frozen=True)
class FitResult:
    model: str
    coefficient: float  # least-squares c in |gap| = c f(alpha)
    exponent: float  # fitted p in |gap| = C alpha^-p
    exponent_sigma: float
    model_exponent: float
    r_squared: float
    consistent: bool
    n_points: int


def remainder_fit(alphas, gaps, budgets=None, model: str = "log/sqrt", noise_factor: float = 10.0) -> FitResult:
    """Fit |gap| against a remainder model; consistent when the fitted decay is at least the model's within 2 sigma."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {sorted(MODELS)}")
    a = np.asarray(alphas, dtype=float)
    g = np.abs(np.asarray(gaps, dtype=float))
    b = np.zeros_like(g) if budgets is None else np.asarray(budgets, dtype=float)
    use = np.isfinite(g) & (g > noise_factor * b) & (g > 0)
    if use.sum() < 3:
        raise InsufficientSignal(f"only {int(use.sum())} points with |gap| above {noise_factor:g}x the FEM budget")
    a, g = a[use], g[use]
    f = MODELS[model](a)
    coef = float(np.dot(f, g) / np.dot(f, f))
    x = np.log(a)
    A = np.c_[np.ones_like(x), -x]
    sol, *_ = np.linalg.lstsq(A, np.log(g), rcond=None)
    resid = np.log(g) - A @ sol
    dof = max(len(a) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    p, sp = float(sol[1]), float(math.sqrt(max(cov[1, 1], 0.0)))
    pm = float(np.linalg.lstsq(A, np.log(f), rcond=None)[0][1])
    pred = coef * f
    ss_res = float(np.sum((g - pred) ** 2))
    ss_tot = float(np.sum((g - g.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return FitResult(model, coef, p, sp, pm, r2, bool(p + 2.0 * sp >= pm), int(len(a)))


# ---------------------------------------------------------------------------
# bracketing


@dataclass
class BracketReport:
    alpha: float
    delta: float
    n: int
    lower: np.ndarray
    middle: np.ndarray
    upper: np.ndarray
    lower_budget: np.ndarray
    middle_budget: np.ndarray
    upper_budget: np.ndarray
    ok_lower: np.ndarray
    ok_upper: np.ndarray
    pieces: dict
    K: int
    cluster_separation: float
    passed: bool

    HEADER = ("n", "lower", "middle", "upper", "lower_budget", "middle_budget", "upper_budget", "ok_lower", "ok_upper")

    def rows(self):
        for k in range(self.n):
            yield (k + 1, self.lower[k], self.middle[k], self.upper[k], self.lower_budget[k],
                   self.middle_budget[k], self.upper_budget[k], bool(self.ok_lower[k]), bool(self.ok_upper[k]))

    def to_csv(self, path=None) -> str:
        return write_csv(path, self.HEADER, self.rows())


def _piece_eigs(m, alpha: float, n: int, mesh: MeshSettings, seed: int):
    k = min(n, m.n_nodes - 3)
    ex = extrapolated_eigs(m, alpha, k, refinements=mesh.refinements, seed=seed)
    return ex.values, ex.budget


def _merge(spectra: list[tuple[str, np.ndarray, np.ndarray]], n: int):
    items = []
    for order, (name, vals, bud) in enumerate(spectra):
        for k, (v, b) in enumerate(zip(vals, bud)):
            items.append((float(v), order, k, float(b)))
    items.sort()
    items = items[:n]
    return np.array([i[0] for i in items]), np.array([i[3] for i in items])


def bracket_check(
    poly: CurvilinearPolygon,
    alpha: float,
    delta: float | None = None,
    n: int = 8,
    mesh: MeshSettings | None = None,
    seed: int = 0,
    raise_on_violation: bool = True,
) -> BracketReport:
    """Neumann-decoupled lower and Dirichlet-decoupled upper bounds around the Robin spectrum."""
    mesh = mesh or MeshSettings()
    if delta is None:
        delta = DeltaRule()(alpha)
    dec = decompose(poly, delta)
    neu = {"star": "robin", "ext": "neumann", "out": "neumann"}
    dir_ = {"star": "robin", "ext": "dirichlet", "out": "dirichlet"}
    low_parts, up_parts, pieces = [], [], {}
    for name, reg in dec.pieces():
        # one triangulation per piece; only the interface tags differ between the two bounds
        m = triangulate(reg, min(mesh.h, 0.5 * reg.diameter()), mesh.grading(alpha), neu)
        vals_n, bud_n = _piece_eigs(m, alpha, n, mesh, seed)
        low_parts.append((name, vals_n, bud_n))
        pieces[f"N:{name}"] = vals_n.tolist()
        if name != "core":
            vals_d, bud_d = _piece_eigs(m.with_bc(dir_), alpha, n, mesh, seed)
            up_parts.append((name, vals_d, bud_d))
            pieces[f"D:{name}"] = vals_d.tolist()
    lower, lb = _merge(low_parts, n)
    upper, ub = _merge(up_parts, n)
    mid, mb, _, _, _ = _solve_polygon(poly, alpha, n, mesh, seed)
    ok_lower = lower <= mid + lb + mb
    ok_upper = mid <= upper + mb + ub
    K = int(np.sum(mid < -alpha**2 * (1.0 + CLUSTER_MARGIN)))
    vn, _ = _merge([p for p in low_parts if p[0].startswith("V")], K + 1)
    vd, _ = _merge([p for p in up_parts if p[0].startswith("V")], max(K, 1))
    sep = float((vn[K] - vd[K - 1]) / alpha**2) if K >= 1 and len(vn) > K else math.nan
    passed = bool(np.all(ok_lower) and np.all(ok_upper))
    rep = BracketReport(float(alpha), float(delta), n, lower, mid, upper, lb, mb, ub, ok_lower, ok_upper,
                        pieces, K, sep, passed)
    if raise_on_violation and not passed:
        bad = [k + 1 for k in range(n) if not (ok_lower[k] and ok_upper[k])]
        raise BracketViolationBeyondBudget(f"bracketing fails beyond the FEM budget for n in {bad}", rep)
    return rep
