"""Command line front end: ``affsurf build | verify | act | export``.

Exit codes: 0 success, 1 verification failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import action, verify
from .atlas import Atlas, SurfaceSpec, build_surface, load_atlas
from .errors import AffSurfError

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

SPEC_KEYS = {"orientable", "genus", "boundary", "hole_params", "seed", "tolerances"}
TOLERANCE_KEYS = {"flow"}
EXPORT_GRID = 40
DISCLAIMER = ("Embedding for display only: each chart is drawn separately in a canonical "
              "position and the surface itself carries no preferred embedding.")


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


# ---------------------------------------------------------------------------
# input handling


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def parse_spec(data) -> tuple[SurfaceSpec, dict | None, dict]:
    """Validate a spec document; returns the surface spec, hole parameters and verification settings."""
    if not isinstance(data, dict):
        raise InputError("spec must be a JSON object")
    unknown = set(data) - SPEC_KEYS
    if unknown:
        raise InputError(f"unknown spec keys: {', '.join(sorted(unknown))}")
    missing = {"orientable", "genus", "boundary"} - set(data)
    if missing:
        raise InputError(f"missing spec keys: {', '.join(sorted(missing))}")
    try:
        spec = SurfaceSpec(data["orientable"], data["genus"], data["boundary"])
    except AffSurfError as exc:
        raise InputError(str(exc)) from exc
    settings = {}
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise InputError("seed must be a non-negative integer")
    settings["seed"] = seed
    tols = data.get("tolerances", {})
    if not isinstance(tols, dict) or set(tols) - TOLERANCE_KEYS:
        raise InputError(f"tolerances may only contain: {', '.join(sorted(TOLERANCE_KEYS))}")
    for k, v in tols.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise InputError(f"tolerance {k} must be a positive number")
        settings[k] = float(v)
    hp = data.get("hole_params")
    if hp is not None and not isinstance(hp, dict):
        raise InputError("hole_params must be an object")
    return spec, hp, settings


def _load(path: str) -> tuple[Atlas, dict]:
    data = _read_json(path)
    try:
        atlas = load_atlas(data)
    except (AffSurfError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot load atlas from {path}: {exc}") from exc
    return atlas, data.get("settings") or {}


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


# ---------------------------------------------------------------------------
# commands


def cmd_build(spec_path: str, out_path: str) -> int:
    spec, hole_params, settings = parse_spec(_read_json(spec_path))
    try:
        atlas = build_surface(spec, hole_params)
    except AffSurfError as exc:
        raise InputError(str(exc)) from exc
    doc = atlas.to_dict()
    doc["settings"] = settings
    Path(out_path).write_text(json.dumps(doc, indent=2, sort_keys=True))
    print(atlas.plan.summary())
    return EXIT_OK


def cmd_verify(atlas_path: str, report_path: str, tol: float | None = None, grid: int | None = None,
               seed: int | None = None) -> int:
    atlas, settings = _load(atlas_path)
    cfg = verify.VerifyConfig()
    cfg.seed = seed if seed is not None else settings.get("seed", cfg.seed)
    cfg.flow_tol = tol if tol is not None else settings.get("flow", cfg.flow_tol)
    if grid is not None:
        cfg.grid = grid
    report = verify.full_report(atlas, cfg)
    Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True))
    if report["pass"]:
        print("pass")
        return EXIT_OK
    print("FAIL: " + ", ".join(verify.failing(report)))
    return EXIT_FAIL


def cmd_act(atlas_path: str, a: float, b: float, chart: str, coords: str, tol: float = 1e-9,
            method: str = "exact") -> int:
    atlas, _ = _load(atlas_path)
    if not (math.isfinite(a) and a > 0) or not math.isfinite(b):
        raise InputError("the affine map needs a > 0 (orientation preserving) and finite b")
    try:
        x, y = (float(v) for v in coords.split(","))
    except ValueError as exc:
        raise InputError(f"coords must be two numbers 'x,y', got {coords!r}") from exc
    if chart not in atlas.charts:
        raise InputError(f"unknown chart {chart!r}; charts: {', '.join(atlas.charts)}")
    if not atlas.charts[chart].in_domain(np.array([[x, y]]))[0]:
        raise InputError(f"point ({x}, {y}) is outside chart {chart}")
    q = action.act(atlas, action.AffElement(a, b), action.SurfacePoints.single(chart, [x, y]), tol, method)
    print(json.dumps({"chart": str(q.charts[0]), "coords": [float(v) for v in q.coords[0]]}))
    return EXIT_OK


def export_grid(atlas: Atlas, out: Path, n: int = EXPORT_GRID) -> list[Path]:
    files = []
    for chart in atlas.charts.values():
        p = chart.sample(n, n)
        X, Y = chart.values(p)
        path = out / f"{chart.id}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["chart_id", "c1", "c2", "X1", "X2", "Y1", "Y2"])
            for row in np.concatenate([p, X, Y], axis=1):
                w.writerow([chart.id] + [repr(float(v)) for v in row])
        files.append(path)
    return files


def _embed(chart, p: np.ndarray) -> np.ndarray:
    """Canonical display position of chart points (one tube, disk or band per chart)."""
    u, v = p[:, 0], p[:, 1]
    if chart.kind == "plane":
        return np.stack([u, v, np.zeros_like(u)], -1)
    if chart.kind == "strip":
        # Moebius band: y1 runs once around the core circle, y2 across the band
        w = 0.25 * v
        r = 1.0 + w * np.cos(u)
        return np.stack([r * np.cos(2 * u), r * np.sin(2 * u), w * np.sin(u)], -1)
    # cylinder coordinates (t, theta) drawn as a tube whose height is t
    return np.stack([np.cos(v), np.sin(v), u], -1)


def export_mesh(atlas: Atlas, out: Path, n: int = EXPORT_GRID) -> Path:
    lines = [f"# {DISCLAIMER}"]
    base = 1
    for k, chart in enumerate(atlas.charts.values()):
        (a0, a1), (b0, b1) = chart.box()
        u = np.linspace(a0, a1, n + 1)
        v = np.linspace(b0, b1, n + 1)
        U, V = np.meshgrid(u, v, indexing="ij")
        p = np.stack([U.ravel(), V.ravel()], -1)
        keep = chart.inside(p)
        xyz = _embed(chart, p) + np.array([4.0 * k, 0.0, 0.0])
        lines.append(f"o {chart.id}")
        lines += [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in xyz]
        idx = np.arange(len(p)).reshape(n + 1, n + 1)
        for i in range(n):
            for j in range(n):
                quad = [idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]]
                if keep[quad].all():
                    lines.append("f " + " ".join(str(base + q) for q in quad))
        base += len(p)
    path = out / "surface.obj"
    path.write_text("\n".join(lines) + "\n")
    return path


def cmd_export(atlas_path: str, out_dir: str, what: str = "grid") -> int:
    atlas, _ = _load(atlas_path)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out_dir}: {exc}") from exc
    if what == "grid":
        files = export_grid(atlas, out)
    elif what == "mesh":
        files = [export_mesh(atlas, out)]
    else:
        raise InputError(f"--what must be grid or mesh, got {what!r}")
    meta = {"what": what, "files": [f.name for f in files], "charts": list(atlas.charts),
            "disclaimer": DISCLAIMER}
    (out / "export.json").write_text(json.dumps(meta, indent=2))
    print(f"wrote {len(files)} file(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="affsurf", description="Affine-group actions on compact surfaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build an atlas from a spec file")
    b.add_argument("--spec", required=True)
    b.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="run every check and write a JSON report")
    v.add_argument("--atlas", required=True)
    v.add_argument("--report", required=True)
    v.add_argument("--tol", type=_positive_float, help="tolerance of the flow-level laws (default 1e-5)")
    v.add_argument("--grid", type=_positive_int, help="sample density per chart (default 200)")
    v.add_argument("--seed", type=int, help="seed for sampled points (default: the seed stored at build time, else 0)")

    a = sub.add_parser("act", help="apply the affine map x -> a x + b to a point")
    a.add_argument("--atlas", required=True)
    a.add_argument("--a", type=float, required=True)
    a.add_argument("--b", type=float, required=True)
    a.add_argument("--chart", required=True)
    a.add_argument("--coords", required=True, help="'x,y'; write --coords=-1,2 for negative values")
    a.add_argument("--tol", type=_positive_float, default=1e-9, help="integrator tolerance")
    a.add_argument("--method", choices=("exact", "rk"), default="exact")

    e = sub.add_parser("export", help="write per-chart CSV grids or an OBJ mesh")
    e.add_argument("--atlas", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--what", choices=("grid", "mesh"), default="grid")
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "build":
            return cmd_build(args.spec, args.out)
        if args.command == "verify":
            return cmd_verify(args.atlas, args.report, args.tol, args.grid, args.seed)
        if args.command == "act":
            return cmd_act(args.atlas, args.a, args.b, args.chart, args.coords, args.tol, args.method)
        return cmd_export(args.atlas, args.out, args.what)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
