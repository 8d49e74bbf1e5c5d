"""Command-line interface: ``robinspec <command> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import replace

import numpy as np

from . import harness, sectors
from .effective import predict
from .errors import RobinSpecError
from .geometry import load_polygon
from .harness import ExperimentConfig, MeshSettings, write_csv, write_manifest
from .mesh import set_default_cache_dir


_PI_FORM = re.compile(r"^(?:([0-9.]+)\*?)?pi(?:/([0-9.]+))?$")


def _angle(text: str) -> float:
    """Radians, or 'pi/4', '3*pi/5', '45deg'."""
    t = text.strip().lower().replace(" ", "")
    if t.endswith("deg"):
        return math.radians(float(t[:-3]))
    m = _PI_FORM.match(t)
    try:
        if m:
            return float(m.group(1) or 1.0) * math.pi / float(m.group(2) or 1.0)
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}") from None


def _grid(text: str) -> np.ndarray:
    """'a:b:steps' -> steps equally spaced values from a to b."""
    try:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like a:b:steps, got {text!r}") from None


def _emit(args, name: str, header, rows, manifest: dict) -> None:
    if args.out:
        path = os.path.join(args.out, f"{name}.csv")
        write_csv(path, header, rows)
        write_manifest(os.path.join(args.out, f"{name}.manifest.json"), manifest)
        print(f"wrote {path}")
    else:
        sys.stdout.write(write_csv(None, header, rows))


def cmd_sector(args) -> int:
    req = sectors.SectorSpectrumRequest(args.theta, args.alpha, args.r, args.ext, args.n)
    sp = sectors.sector_eigs(req)
    rows = [(args.theta, args.r, k + 1, v) for k, v in enumerate(sp.values)]
    _emit(args, "sector", ("theta", "r", "k", "E_k"), rows,
          {"command": "sector", "request": vars_clean(args), "budget": sp.budget, "meta": sp.meta})
    return 0


def cmd_kappa(args) -> int:
    cd = sectors.corner_data(args.theta)
    rec = {"theta": cd.theta, "kappa": cd.kappa, "energies": cd.energies.tolist(),
           "uncertainty": cd.uncertainty.tolist(), "counts": cd.counts}
    print(json.dumps(rec, sort_keys=True))
    if args.out:
        write_manifest(os.path.join(args.out, "kappa.manifest.json"), {"command": "kappa", "result": rec})
    return 0


def cmd_nonres(args) -> int:
    res = sectors.nonresonance(args.theta, args.r_grid, margin=args.margin)
    rows = [(res.theta, r, g, b, used) for r, g, b, used in res.gap_curve]
    rec = res.as_record()
    _emit(args, "nonres", ("theta", "r", "gap", "budget", "used_in_fit"), rows, {"command": "nonres", "verdict": rec})
    print(json.dumps({k: rec[k] for k in ("theta", "kappa", "verdict", "C_fit", "p_fit", "r_squared", "note")},
                     sort_keys=True))
    return 0


def cmd_predict(args) -> int:
    poly = load_polygon(args.polygon)
    pred = predict(poly, args.alpha, args.n, args.formula, corner_mode=args.corners)
    rows = []
    for k, c in enumerate(pred.corner_levels, start=1):
        rows.append((k, c.value, "corner", f"vertex {c.vertex}"))
    for s in pred.side_levels:
        rows.append((pred.K + s.n, s.value, s.formula, pred.remainder))
    _emit(args, "predict", ("n", "predicted", "formula", "remainder"), rows,
          {"command": "predict", "polygon": poly.name, "hypothesis": pred.hypothesis, "terms": pred.terms,
           "n_variant": pred.n_variant})
    print(f"# hypothesis: {pred.hypothesis}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.out:
        cfg = replace(cfg, output=args.out)
    table = harness.run_experiment(cfg)
    if not cfg.output:
        sys.stdout.write(table.to_csv())
    else:
        print(f"wrote {os.path.join(cfg.output, cfg.name + '.csv')}")
    return 1 if table.partial else 0


def cmd_bracket(args) -> int:
    poly = load_polygon(args.polygon)
    mesh = MeshSettings(refinements=args.refinements)
    try:
        rep = harness.bracket_check(poly, args.alpha, args.delta, args.n, mesh)
        status = 0
    except harness.BracketViolationBeyondBudget as exc:
        rep, status = exc.report, 2
    _emit(args, "bracket", rep.HEADER, list(rep.rows()),
          {"command": "bracket", "polygon": poly.name, "alpha": rep.alpha, "delta": rep.delta, "K": rep.K,
           "cluster_separation": rep.cluster_separation, "pieces": rep.pieces, "passed": rep.passed})
    print(f"# bracketing {'passed' if rep.passed else 'FAILED'}", file=sys.stderr)
    return status


def vars_clean(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robinspec", description="Robin Laplacian spectra on polygons and sectors.")
    p.add_argument("--out", metavar="DIR", help="write CSV and a run manifest into DIR")
    p.add_argument("--mesh-cache", metavar="DIR", help="reuse/store meshes in DIR")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sector", help="lowest eigenvalues of a truncated sector")
    s.add_argument("--theta", type=_angle, required=True)
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--ext", choices=["D", "N", "R"], default="N")
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("-n", type=int, default=1)
    s.set_defaults(func=cmd_sector)

    s = sub.add_parser("kappa", help="number and values of the discrete sector energies")
    s.add_argument("--theta", type=_angle, required=True)
    s.set_defaults(func=cmd_kappa)

    s = sub.add_parser("nonres", help="non-resonance test for a half-angle")
    s.add_argument("--theta", type=_angle, required=True)
    s.add_argument("--r-grid", type=_grid, required=True)
    s.add_argument("--margin", type=float, default=0.05)
    s.set_defaults(func=cmd_nonres)

    s = sub.add_parser("predict", help="asymptotic eigenvalue prediction")
    s.add_argument("--polygon", required=True, help="built-in name such as 'square(1)' or a YAML file")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--formula", choices=["thm1", "thm2", "thm3"], default="thm1")
    s.add_argument("-n", type=int, default=1)
    s.add_argument("--corners", choices=["auto", "numeric", "formula"], default="auto")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("verify", help="run an experiment described by a YAML config")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("bracket", help="Dirichlet-Neumann bracketing check")
    s.add_argument("--polygon", required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("-n", type=int, default=8)
    s.add_argument("--refinements", type=int, default=1)
    s.set_defaults(func=cmd_bracket)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.mesh_cache:
        set_default_cache_dir(args.mesh_cache)
    try:
        return int(args.func(args) or 0)
    except (RobinSpecError, ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
