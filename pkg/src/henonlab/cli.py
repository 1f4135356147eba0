"""Command-line interface: single solves, parameter sweeps and reports.

Subcommands
-----------
constants   t-bar, kappa, gamma and the per-alpha threshold table.
radial      two-zone radial solution(s) by shooting.
solve       one nodal Nehari minimization on the sector grid.
classify    nodal topology of a saved field.
morse       Morse counts of a saved field, or angular modes of a radial profile.
sweep       minimize + classify + morse over an (alpha, p, n) grid.
report      markdown and CSV summary of a sweep directory.

List syntax: ``--alpha 0,1,2``; ``--p 25:100:25`` expands to 25,50,75,100
(stop inclusive) and items can be mixed with commas; ``--n 1..5``.

A config file holds flat ``key = value`` lines using the long option names
(``nr = 192``, ``residual_tol = 1e-8``); command-line flags take precedence.
``HENON_THREADS`` caps the number of worker processes used by ``sweep``.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 consistency finding.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .constants import (
    EIGHT_PI_E,
    FOUR_PI_E,
    ConfigurationError,
    ProblemParams,
    default_constants,
    predict_cases,
    radial_energy_limit,
    threshold_table,
)
from .mesh import Field, build_mesh, mesh_metadata, read_field_csv, write_field_csv
from .nehari import INIT_KINDS, ProjectionError, SolveConfig, minimize, solver_mesh
from .nodal import DEFAULT_BAND, analyze, radial_region_energies
from .radial import ShootingError, radial_energy_table, radial_profile
from .spectrum import morse_index_full, morse_index_symmetric, radial_mode_decomposition

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_FINDING = 4

#: Morse index in the symmetric space expected for least-energy nodal solutions.
EXPECTED_SYMMETRIC_INDEX = 2

PHASE_COLUMNS = ["alpha", "p", "n", "case", "regions", "m_n", "p_energy",
                 "predicted_admissible", "consistent"]

DEFAULTS = {
    "alpha": "0", "p": "30", "n": "2", "nr": 192, "ntheta": 96,
    "init": "radial-perturbed", "seed": 0, "restarts": 3,
    "residual_tol": 1e-8, "floor_aware": True, "max_iterations": 2000,
    "amplitude": 0.2, "r_min_factor": 3.0, "band": DEFAULT_BAND,
}
CONFIG_TYPES = {
    "alpha": str, "p": str, "n": str, "nr": int, "ntheta": int, "init": str, "seed": int,
    "restarts": int, "residual_tol": float, "max_iterations": int, "amplitude": float,
    "r_min_factor": float, "band": float, "floor_aware": None,
}


class UsageError(ValueError):
    """Malformed command-line input."""


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def parse_float_list(text: str) -> list[float]:
    """Comma-separated numbers; an item ``start:stop:step`` expands with the stop included."""
    if text is None or not str(text).strip():
        return []
    out: list[float] = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            raise UsageError(f"empty item in list {text!r}")
        try:
            if ":" in item:
                parts = [float(x) for x in item.split(":")]
                if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                    raise UsageError(f"range {item!r} must be start:stop:step with step > 0")
                start, stop, step = parts
                count = int(math.floor((stop - start) / step + 1e-9)) + 1
                out.extend(start + k * step for k in range(count))
            else:
                out.append(float(item))
        except ValueError as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"cannot parse number in {text!r}") from None
    if not all(math.isfinite(x) for x in out):
        raise UsageError(f"non-finite value in {text!r}")
    return out


def parse_n_range(text: str) -> list[int]:
    """``a..b`` (inclusive), a single integer, or a comma list of either."""
    out: list[int] = []
    for item in str(text).split(","):
        item = item.strip()
        try:
            if ".." in item:
                a, b = (int(x) for x in item.split(".."))
                if b < a:
                    raise UsageError(f"n range {item!r} is empty")
                out.extend(range(a, b + 1))
            else:
                out.append(int(item))
        except ValueError as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"cannot parse n range {text!r}") from None
    if any(n < 1 for n in out):
        raise UsageError("n must be >= 1")
    return out


def parse_alpha_list(text) -> list[float]:
    alphas = parse_float_list(text)
    if any(a < 0 for a in alphas):
        raise UsageError("alpha must be >= 0")
    return alphas


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        kind = CONFIG_TYPES[key]
        try:
            if kind is None:
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError
                out[key] = value.lower() in ("true", "1", "yes")
            else:
                out[key] = kind(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def resolve(args) -> dict:
    """Merge built-in defaults, the config file and command-line flags (flags win)."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if merged["init"] not in INIT_KINDS:
        raise UsageError(f"--init must be one of {', '.join(INIT_KINDS)}")
    return merged


# ---------------------------------------------------------------------------
# output formatting
# ---------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_clean(v) for v in items]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def to_json(obj) -> str:
    """JSON text; floats are written with round-trip (up to 17 significant digit) precision."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True)


def fmt(x) -> str:
    """Human table cell: 10 significant digits for floats."""
    if isinstance(x, (float, np.floating)):
        return "nan" if not math.isfinite(x) else f"{x:.10g}"
    if x is None:
        return "-"
    return str(x)


def print_table(rows: list[dict], columns: list[str], stream=None) -> None:
    stream = stream or sys.stdout
    cells = [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c)
              for i, c in enumerate(columns)]
    stream.write("  ".join(c.ljust(w) for c, w in zip(columns, widths)) + "\n")
    for row in cells:
        stream.write("  ".join(v.ljust(w) for v, w in zip(row, widths)) + "\n")


def _emit(result: dict, as_json: bool, table=None) -> None:
    if as_json or table is None:
        print(to_json(result))
    else:
        table()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_constants(args) -> int:
    alphas = parse_alpha_list(args.alpha) or [0.0, 1.0, 2.0]
    c = default_constants()
    result = {
        "tbar": c.tbar, "kappa": c.kappa, "gamma": c.gamma,
        "published_gamma": c.published_gamma,
        "gamma_relative_discrepancy": c.gamma_discrepancy,
        "thresholds": threshold_table(alphas, c),
    }

    def table():
        print(f"tbar  = {c.tbar:.10g}\nkappa = {c.kappa:.10g}\n"
              f"gamma = {c.gamma:.10g} (published {c.published_gamma:.10g}, "
              f"relative difference {c.gamma_discrepancy:.3g})")
        print_table(result["thresholds"], ["alpha", "multiplicity", "case1_max_n", "case2_max_n",
                                           "N_alpha", "guaranteed_quasiradial",
                                           "radial_energy_target"])

    _emit(result, args.json, table)
    return EXIT_OK


def radial_record(alpha: float, p: float) -> dict:
    prof = radial_profile(alpha, p)
    rec = prof.record()
    rec.update({
        "p_dirichlet": prof.p_dirichlet,
        "target_published": radial_energy_limit(alpha, default_constants().published_gamma),
        "core_radius": prof.core_radius,
        "regions": radial_region_energies(prof),
    })
    return rec


def cmd_radial(args) -> int:
    alphas = parse_alpha_list(args.alpha if args.alpha is not None else "0")
    ps = parse_float_list(args.p if args.p is not None else "30")
    if not alphas or not ps:
        raise UsageError("--alpha and --p need at least one value")
    if any(p <= 1 for p in ps):
        raise UsageError("p must exceed 1")
    results = []
    for alpha in alphas:
        if len(ps) > 1:
            results.append(radial_energy_table(alpha, ps))
        for p in ps:
            rec = radial_record(alpha, p)
            results.append(rec)
            if args.out:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                stem = out / f"radial_a{alpha:g}_p{p:g}"
                prof = radial_profile(alpha, p)
                with open(f"{stem}.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["r", "value"])
                    for r, v in zip(prof.nodes, prof.values):
                        w.writerow([f"{r:.17g}", f"{v:.17g}"])
                Path(f"{stem}.json").write_text(to_json(rec))
    records = [r for r in results if "rows" not in r]

    def table():
        print_table(records, ["alpha", "p", "p_energy", "target", "target_published",
                              "p_dirichlet", "interior_zero", "central_value"])
        for r in results:
            if "rows" in r:
                print(f"alpha={r['alpha']:g}: gap to target decreasing along p: {r['gap_decreasing']}")

    _emit({"results": results}, args.json, table)
    return EXIT_OK


def _solve_config(cfg: dict) -> SolveConfig:
    return SolveConfig(
        init_kind=cfg["init"], perturbation_amplitude=cfg["amplitude"],
        max_iterations=cfg["max_iterations"], residual_tolerance=cfg["residual_tol"],
        random_seed=cfg["seed"], restarts=cfg["restarts"], floor_aware=cfg["floor_aware"],
    )


def _single(values: list, name: str):
    if len(values) != 1:
        raise UsageError(f"{name} takes a single value for this subcommand")
    return values[0]


def cmd_solve(args) -> int:
    cfg = resolve(args)
    params = ProblemParams(
        alpha=_single(parse_alpha_list(cfg["alpha"]), "--alpha"),
        p=_single(parse_float_list(cfg["p"]), "--p"),
        n=_single(parse_n_range(cfg["n"]), "--n"),
    )
    mesh = solver_mesh(params, cfg["nr"], cfg["ntheta"], cfg["r_min_factor"])
    sol = minimize(_solve_config(cfg), params, mesh)
    result = {"config": cfg, "solution": sol.record(), "mesh": mesh_metadata(mesh)}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"field_a{params.alpha:g}_p{params.p:g}_n{params.n}"
        write_field_csv(out / f"{stem}.csv", sol.field, p=params.p, energy=sol.energy,
                        p_energy=sol.scaled_energy, residual=sol.residual,
                        converged=sol.converged, init_kind=sol.init_kind, seed=sol.seed)
        (out / f"{stem}.result.json").write_text(to_json(result))

    def table():
        rec = sol.record()
        print_table([rec], ["alpha", "p", "n", "p_energy", "residual", "init_kind",
                            "iterations", "converged"])

    _emit(result, args.json, table)
    return EXIT_OK if sol.converged else EXIT_SOLVER


def _load_field(args):
    try:
        fld, meta = read_field_csv(args.field)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read field {args.field}: {exc}") from None
    alpha = args.alpha if args.alpha is not None else meta.get("alpha", 0.0)
    p = args.p if args.p is not None else meta.get("p")
    if p is None:
        raise UsageError("the field sidecar has no p; pass --p")
    try:
        params = ProblemParams(alpha=float(alpha), p=float(p), n=fld.mesh.n)
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise UsageError(f"bad --alpha/--p: {exc}") from None
    mesh = fld.mesh.with_alpha(params.alpha)
    return Field(mesh, fld.values), params


def cmd_classify(args) -> int:
    fld, params = _load_field(args)
    band = args.band if args.band is not None else DEFAULT_BAND
    report = analyze(fld.mesh, fld, params, band)
    result = report.as_dict()
    result["predicted"] = predict_cases(params).as_dict()

    def table():
        print(f"case {report.case}, {report.region_count} regions, quasiradial {report.quasiradial}, "
              f"robust {report.robust}")
        for f in report.findings:
            print(f"finding: {f}")

    _emit(result, args.json, table)
    return EXIT_FINDING if report.findings else EXIT_OK


def cmd_morse(args) -> int:
    if args.field is None:
        alpha = _single(parse_alpha_list(args.alpha if args.alpha is not None else "0"), "--alpha")
        p = _single(parse_float_list(args.p if args.p is not None else "10"), "--p")
        modes = radial_mode_decomposition(radial_profile(alpha, p), N_r=args.nr or 1024)
        result = {"alpha": alpha, "p": p, **modes.as_dict()}

        def table():
            print(f"alpha={alpha:g} p={p:g}: radial count {modes.radial_count}, total {modes.total}")
            print("negative eigenvalues per angular mode k:", list(modes.counts))

        _emit(result, args.json, table)
        return EXIT_OK
    fld, params = _load_field(args)
    sym = morse_index_symmetric(fld.mesh, fld, params.p)
    result = {"symmetric": sym.as_dict()}
    if args.full:
        result["full"] = morse_index_full(fld.mesh, fld, params.p).as_dict()

    def table():
        print(f"m_n = {sym.negative_count} on {sym.grid} ({sym.method})")
        if args.full:
            print(f"m = {result['full']['negative_count']}")

    _emit(result, args.json, table)
    flagged = sym.flagged or not sym.consistent
    return EXIT_FINDING if flagged else EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _radial_baseline(alpha: float, p: float) -> float:
    try:
        return radial_profile(alpha, p).p_energy
    except ShootingError:
        return math.nan


def run_cell(cell: dict) -> dict:
    """Solve, classify and count one (alpha, p, n) cell.  Pure function of ``cell``."""
    start = time.perf_counter()
    cfg = cell["config"]
    params = ProblemParams(alpha=cell["alpha"], p=cell["p"], n=cell["n"])
    pred = predict_cases(params)
    out = {"alpha": params.alpha, "p": params.p, "n": params.n,
           "predicted": pred.as_dict(), "findings": []}
    try:
        mesh = solver_mesh(params, cfg["nr"], cfg["ntheta"], cfg["r_min_factor"])
        sol = minimize(_solve_config(cfg), params, mesh)
    except (ProjectionError, ShootingError, np.linalg.LinAlgError) as exc:
        out.update({"status": "failed", "error": str(exc), "converged": False,
                    "wall_time": time.perf_counter() - start})
        return out
    report = analyze(mesh, sol.field, params, cfg["band"])
    morse = morse_index_symmetric(mesh, sol.field, params.p)
    findings = list(report.findings)
    if sol.converged and morse.negative_count != EXPECTED_SYMMETRIC_INDEX:
        findings.append(f"m_n = {morse.negative_count}, expected {EXPECTED_SYMMETRIC_INDEX}")
    if morse.flagged:
        findings.append(f"spectral count flagged: {morse.message}")
    out.update({
        "status": "converged" if sol.converged else "not-converged",
        "converged": sol.converged,
        "solution": sol.record(),
        "nodal": report.as_dict(),
        "morse": morse.as_dict(),
        "case": report.case,
        "regions": report.region_count,
        "m_n": morse.negative_count,
        "p_energy": sol.scaled_energy,
        "radial_p_energy": _radial_baseline(params.alpha, params.p),
        "radial_target": radial_energy_limit(params.alpha),
        "findings": findings,
        "consistent": not findings,
        "mesh": mesh_metadata(mesh),
        "field": sol.field.vector.tolist(),
        "wall_time": time.perf_counter() - start,
    })
    return out


def _cell_stem(cell: dict) -> str:
    return f"cell_a{cell['alpha']:g}_p{cell['p']:g}_n{cell['n']}"


def _worker_count(n_cells: int) -> int:
    raw = os.environ.get("HENON_THREADS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise UsageError(f"HENON_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(workers, n_cells))


def run_sweep(alphas, ps, ns, cfg: dict, out_dir) -> dict:
    """Run every cell and write per-cell JSON, field CSVs, the manifest and the phase CSV.

    Cells are independent; results are written by this process in the fixed
    (alpha, p, n) order whatever the number of workers.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = [{"alpha": float(a), "p": float(p), "n": int(n), "config": cfg}
             for a in alphas for p in ps for n in ns]
    for c in cells:
        ProblemParams(alpha=c["alpha"], p=c["p"], n=c["n"])
    workers = _worker_count(len(cells))
    if workers == 1:
        results = [run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, cells))
    rows = []
    for cell, res in zip(cells, results):
        stem = _cell_stem(cell)
        vec = res.pop("field", None)
        if vec is not None:
            meta = res["mesh"]
            mesh = build_mesh(meta["n"], meta["N_r"], meta["N_theta"], meta["grading"],
                              alpha=meta["alpha"], r_min=meta["r_min"])
            field_name = stem.replace("cell_", "field_", 1) + ".csv"
            write_field_csv(out / field_name, Field.from_vector(mesh, np.array(vec)),
                            p=res["p"], p_energy=res["p_energy"], case=res["case"])
            res["field_csv"] = field_name
        (out / f"{stem}.json").write_text(to_json(res))
        rows.append(res)
    with (out / "phase.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PHASE_COLUMNS)
        for r in rows:
            w.writerow([
                f"{r['alpha']:.17g}", f"{r['p']:.17g}", r["n"], r.get("case", "failed"),
                r.get("regions", ""), r.get("m_n", ""),
                f"{r['p_energy']:.17g}" if "p_energy" in r else "",
                " ".join(r["predicted"]["admissible"]),
                str(r.get("consistent", False)).lower(),
            ])
    run_id = f"{_dt.datetime.now(_dt.timezone.utc).strftime('%Y%m%dT%H%M%SZ')}-seed{cfg['seed']}"
    manifest = {
        "run_id": run_id, "version": __version__, "config": cfg,
        "alphas": list(alphas), "p_values": list(ps), "n_values": list(ns), "workers": workers,
        "cells": [{k: r.get(k) for k in ("alpha", "p", "n", "status", "converged", "p_energy",
                                          "case", "m_n", "regions", "consistent", "wall_time")}
                  for r in rows],
    }
    (out / "manifest.json").write_text(to_json(manifest))
    return {"manifest": manifest, "cells": rows}


def sweep_exit_code(cells: list) -> int:
    if any(not c.get("converged") for c in cells):
        return EXIT_SOLVER
    if any(c.get("findings") for c in cells):
        return EXIT_FINDING
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = resolve(args)
    alphas = parse_alpha_list(cfg["alpha"])
    ps = parse_float_list(cfg["p"])
    ns = parse_n_range(cfg["n"])
    if not alphas or not ps or not ns:
        raise UsageError("sweep needs at least one alpha, p and n")
    if not args.out:
        raise UsageError("sweep needs --out DIR")
    result = run_sweep(alphas, ps, ns, cfg, args.out)
    cells = result["cells"]

    def table():
        print_table(cells, ["alpha", "p", "n", "status", "case", "regions", "m_n", "p_energy",
                            "radial_p_energy", "consistent", "wall_time"])
        for c in cells:
            for f in c.get("findings", []):
                print(f"finding (alpha={c['alpha']:g}, p={c['p']:g}, n={c['n']}): {f}")

    _emit(result["manifest"], args.json, table)
    return sweep_exit_code(cells)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ["alpha", "p", "n", "case", "admissible", "regions", "N_alpha", "m_n",
                  "p_energy", "radial_p_energy", "radial_target", "min_region_ratio_4pie",
                  "status"]


def report_rows(cells: list) -> list[dict]:
    rows = []
    for c in cells:
        pred = c.get("predicted", {})
        row = {"alpha": c.get("alpha"), "p": c.get("p"), "n": c.get("n"),
               "case": c.get("case", "failed"), "admissible": " ".join(pred.get("admissible", [])),
               "regions": c.get("regions"), "N_alpha": pred.get("max_regions"),
               "m_n": c.get("m_n"), "p_energy": c.get("p_energy"),
               "radial_p_energy": c.get("radial_p_energy"), "radial_target": c.get("radial_target")}
        regions = (c.get("nodal") or {}).get("regions", [])
        ratios = [r["scaled_energy"] / FOUR_PI_E for r in regions
                  if r.get("scaled_energy") is not None]
        row["min_region_ratio_4pie"] = min(ratios) if ratios else None
        flags = list(c.get("findings", []))
        if not c.get("converged"):
            flags.append(c.get("error") or "not converged")
        if (c.get("case") not in (None, "failed", "case1") and row["regions"] is not None
                and row["N_alpha"] is not None and row["regions"] > row["N_alpha"]):
            msg = f"{row['regions']} regions exceed N_alpha = {row['N_alpha']}"
            if msg not in flags:
                flags.append(msg)
        row["status"] = "flag" if flags else "pass"
        row["flags"] = flags
        rows.append(row)
    return rows


def write_report(sweep_dir) -> tuple[Path, list, list]:
    """Read every cell JSON in ``sweep_dir`` and write report.md and report.csv."""
    sweep_dir = Path(sweep_dir)
    if not sweep_dir.is_dir():
        raise UsageError(f"{sweep_dir} is not a directory")
    files = sorted(sweep_dir.glob("cell_*.json"))
    if not files:
        raise UsageError(f"{sweep_dir} holds no cell files")
    cells, broken = [], []
    for f in files:
        try:
            cells.append(json.loads(f.read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            broken.append(f"{f.name}: {exc}")
    cells.sort(key=lambda c: (c.get("alpha", 0), c.get("p", 0), c.get("n", 0)))
    rows = report_rows(cells)
    with (sweep_dir / "report.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in REPORT_COLUMNS])
    c = default_constants()
    lines = ["# Sweep report", ""]
    lines.append(f"gamma = {c.gamma:.10g} from its closed form; published value {c.published_gamma:.10g}.")
    lines += ["", "## Radial baseline", "",
              "| alpha | target 2(2+alpha) gamma pi e | with published gamma |", "|---|---|---|"]
    for alpha in sorted({r["alpha"] for r in rows if r["alpha"] is not None}):
        lines.append(f"| {fmt(alpha)} | {fmt(radial_energy_limit(alpha, c.gamma))} | "
                     f"{fmt(radial_energy_limit(alpha, c.published_gamma))} |")
    lines += ["", f"Region references: 8 pi e = {fmt(EIGHT_PI_E)}, 4 pi e = {fmt(FOUR_PI_E)}.", "",
              "## Cells", "", "| " + " | ".join(REPORT_COLUMNS) + " |",
              "|" + "---|" * len(REPORT_COLUMNS)]
    for r in rows:
        lines.append("| " + " | ".join(fmt(r.get(col)) for col in REPORT_COLUMNS) + " |")
    flagged = [r for r in rows if r["flags"]]
    if flagged:
        lines += ["", "## Flags", ""]
        for r in flagged:
            for f in r["flags"]:
                lines.append(f"- alpha={fmt(r['alpha'])}, p={fmt(r['p'])}, n={r['n']}: {f}")
    if broken:
        lines += ["", "## Unreadable cell files", ""] + [f"- {b}" for b in broken]
    path = sweep_dir / "report.md"
    path.write_text("\n".join(lines) + "\n")
    return path, rows, broken


def cmd_report(args) -> int:
    path, rows, broken = write_report(args.sweep_dir)
    result = {"report": str(path), "rows": rows, "unreadable": broken}

    def table():
        print_table(rows, REPORT_COLUMNS)
        print(f"written {path}")

    _emit(result, args.json, table)
    return EXIT_FINDING if broken or any(r["flags"] for r in rows) else EXIT_OK


# ---------------------------------------------------------------------------
# argument parser
# ---------------------------------------------------------------------------

def _common(sub, solver: bool = True) -> None:
    sub.add_argument("--alpha", help="alpha value(s), e.g. 0 or 0,1,2")
    sub.add_argument("--p", help="p value(s), e.g. 30 or 25:100:25")
    sub.add_argument("--json", action="store_true", help="print JSON instead of a table")
    sub.add_argument("--out", help="output directory")
    if solver:
        sub.add_argument("--n", help="symmetry order(s), e.g. 2 or 1..5")
        sub.add_argument("--nr", type=int, help="radial intervals of the sector grid")
        sub.add_argument("--ntheta", type=int, help="angular nodes per sector (even)")
        sub.add_argument("--init", choices=INIT_KINDS, help="initial-guess kind of the first restart")
        sub.add_argument("--seed", type=int, help="base random seed")
        sub.add_argument("--restarts", type=int, help="number of restarts (kinds are cycled)")
        sub.add_argument("--residual-tol", dest="residual_tol", type=float,
                         help="L^2 residual tolerance")
        sub.add_argument("--floor-aware", dest="floor_aware", action=argparse.BooleanOptionalAction,
                         default=None, help="accept residuals down to the rounding floor estimate")
        sub.add_argument("--max-iterations", dest="max_iterations", type=int)
        sub.add_argument("--amplitude", type=float, help="perturbation amplitude of the initial guess")
        sub.add_argument("--r-min-factor", dest="r_min_factor", type=float,
                         help="innermost ring radius in units of the radial core radius")
        sub.add_argument("--band", type=float, help="zero-band half width for classification")
        sub.add_argument("--config", help="flat key = value config file (flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="henonlab", description=__doc__.split("\n\n")[0],
        epilog="Lists: --alpha 0,1,2 ; --p start:stop:step (stop included) ; --n a..b.  "
               "HENON_THREADS caps sweep workers.  Exit codes: 0 ok, 2 usage, "
               "3 solver failure, 4 consistency finding.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("constants", help="asymptotic constants and thresholds")
    p.add_argument("--alpha", help="alpha list (default 0,1,2)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_constants)

    p = subs.add_parser("radial", help="radial two-zone solutions")
    _common(p, solver=False)
    p.set_defaults(func=cmd_radial)

    p = subs.add_parser("solve", help="minimize on the nodal Nehari set for one (alpha, p, n)")
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = subs.add_parser("classify", help="nodal topology of a saved field CSV")
    p.add_argument("field", help="field CSV written by solve or sweep")
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--band", type=float)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = subs.add_parser("morse", help="Morse counts of a saved field, or radial mode counts")
    p.add_argument("field", nargs="?", help="field CSV; omit for the radial profile at --alpha/--p")
    p.add_argument("--alpha")
    p.add_argument("--p")
    p.add_argument("--nr", type=int, help="radial resolution of the mode decomposition")
    p.add_argument("--full", action="store_true", help="also count on the full space")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_morse)

    p = subs.add_parser("sweep", help="solve, classify and count over an (alpha, p, n) grid")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("report", help="summarize a sweep directory")
    p.add_argument("sweep_dir")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"henonlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProjectionError, ShootingError) as exc:
        print(f"henonlab {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
