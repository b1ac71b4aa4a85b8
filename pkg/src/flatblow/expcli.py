"""Command-line front end: verify, sweep, canard, print-config, list.

Exit codes: 0 when everything requested passed, 1 when a numerical case
failed, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np

from .maps import CanardResult, canard_bisect, fit_log_linear
from .odecore import BracketError, EventSpec, IntegratorConfig, integrate
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentResult,
    run_experiment,
    worker_count,
)
from .systems import REGISTRY, AircraftParams, get_system

__all__ = ["main", "write_results"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CSV_HEADER = ("experiment", "case", "eps", "predicted", "measured", "error", "tol", "pass")


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([x if isinstance(x, str) else _fmt(x) for x in r])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_results(out_dir: Path, results: Sequence[ExperimentResult], cfg: ExperimentConfig,
                  started: float, elapsed: float) -> None:
    """results.csv, summary.json and manifest.json; only the manifest carries timestamps."""
    rows = [(res.exp_id, r.case, r.eps, r.predicted, r.measured, r.error, r.tol, r.passed)
            for res in results for r in res.rows]
    _atomic_write(out_dir / "results.csv", _csv_text(CSV_HEADER, rows))
    summary = {
        "passed": all(r.passed for r in results),
        "experiments": {
            res.exp_id: {
                "title": res.title,
                "passed": res.passed,
                "cases": len(res.rows),
                "failing": [r.case + (f" (eps={r.eps:g})" if math.isfinite(r.eps) else "") for r in res.failing()],
            }
            for res in results
        },
    }
    _atomic_write(out_dir / "summary.json", json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")
    manifest = {
        "artifact_version": _version(),
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_s": elapsed,
        "config": cfg.data,
        "cases": [{"experiment": res.exp_id, "case": r.case, "eps": r.eps, "tol": r.tol, "pass": r.passed}
                  for res in results for r in res.rows],
    }
    _atomic_write(out_dir / "manifest.json", json.dumps(_json_safe(manifest), indent=2, sort_keys=True) + "\n")


# subcommands -------------------------------------------------------------

def _load_config(path: str | None) -> ExperimentConfig:
    try:
        return ExperimentConfig.load(path)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from None


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    ids = list(EXPERIMENTS) if args.exp_id == "all" else [args.exp_id]
    if ids[0] not in EXPERIMENTS:
        raise UsageError(f"unknown experiment id {args.exp_id!r}; try 'list'")
    overrides = {}
    if args.model:
        if ids != ["q-invariance"]:
            raise UsageError("--model only applies to q-invariance")
        overrides["models"] = [args.model]
        if args.model not in ("kuehn", "tanh", "aircraft"):
            raise UsageError(f"unknown model {args.model!r}")
    workers = worker_count(args.threads)
    started = time.time()
    t0 = time.perf_counter()
    results = [run_experiment(i, cfg, workers, **overrides) for i in ids]
    out = Path(args.out or cfg.data["output_dir"])
    write_results(out, results, cfg, started, time.perf_counter() - t0)
    for res in results:
        print(f"{'PASS' if res.passed else 'FAIL'} {res.exp_id} ({len(res.rows)} cases, {res.elapsed:.1f}s)")
        for r in res.failing():
            print(f"  failing: {r.case} eps={_fmt(r.eps)} measured={_fmt(r.measured)} "
                  f"predicted={_fmt(r.predicted)} error={_fmt(r.error)} tol={_fmt(r.tol)}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _parse_assign(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise UsageError(f"expected name=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _default_start(model: str, params: dict) -> list[float]:
    if model == "aircraft.uv":
        p = AircraftParams(**params)
        v0 = p.v_f + 0.5
        return [(p.a - v0) * math.exp(v0 * p.b), v0]
    raise UsageError(f"--x0 is required for {model}")


def cmd_sweep(args) -> int:
    if args.model not in REGISTRY:
        raise UsageError(f"unknown model {args.model!r}")
    base = {}
    for s in args.param or []:
        k, v = _parse_assign(s)
        base[k] = float(v)
    grid: list[tuple[str, list[float]]] = []
    for s in args.grid or []:
        k, v = _parse_assign(s)
        vals = [float(x) for x in v.split(",") if x.strip()]
        if not vals:
            raise UsageError(f"grid axis {k!r} is empty")
        grid.append((k, vals))
    if not grid:
        raise UsageError("the parameter grid is empty; give at least one --grid name=v1,v2")
    names = [k for k, _ in grid]
    points = [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in grid))]
    out = Path(args.out)
    cfg = IntegratorConfig(args.rel_tol, args.abs_tol, method=args.method, max_steps=args.max_steps)

    def one(idx_point):
        idx, point = idx_point
        params = {**base, **point}
        try:
            sys_ = get_system(args.model, **params)
        except (TypeError, ValueError) as exc:
            return idx, params, None, f"bad parameters: {exc}"
        x0 = [float(x) for x in args.x0.split(",")] if args.x0 else _default_start(args.model, params)
        eps = params.get("eps", 0.0)
        t_max = args.t_max if args.t_max else (10.0 / eps if eps > 0 else 100.0)
        events = []
        if args.section:
            var, val = _parse_assign(args.section)
            k = sys_.index(var)
            events.append(EventSpec(lambda z, k=k, c=float(val): z[k] - c, "any", True))
        tr = integrate(sys_, x0, (0.0, t_max), cfg, events)
        rows = [(t, *s) for t, s in zip(tr.times, tr.states)]
        return idx, params, (sys_.var_names, rows), tr.status

    results = []
    workers = worker_count(args.threads)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, enumerate(points)))
    else:
        results = [one(ip) for ip in enumerate(points)]
    index_rows = []
    any_fail = False
    for idx, params, data, status in results:
        fname = f"point_{idx:04d}.csv"
        if data is not None:
            var_names, rows = data
            _atomic_write(out / fname, _csv_text(("t", *var_names), rows))
            n = len(rows)
        else:
            fname, n = "", 0
        ok = status in ("completed", "terminated_by_event")
        any_fail |= not ok
        index_rows.append((idx, json.dumps(params, sort_keys=True), fname, status, n))
    _atomic_write(out / "index.csv", _csv_text(("point", "params", "file", "status", "n_rows"), index_rows))
    print(f"wrote {len(points)} trajectories to {out}")
    return EXIT_FAIL if any_fail else EXIT_OK


def _canard_json(r: CanardResult) -> dict:
    d = asdict(r)
    d["classifier_log"] = [[a, c] for a, c in r.classifier_log]
    return d


def cmd_canard(args) -> int:
    base = AircraftParams(args.a, args.b, 0.0, args.eps)
    if args.ladder:
        eps_list = [float(x) for x in args.ladder.split(",")]
        pairs = []
        for e in eps_list:
            r = canard_bisect(AircraftParams(args.a, args.b, 0.0, e), (args.lo, args.hi), args.max_iter)
            pairs.append({"eps": e, "stall_width": r.width, "alpha_c": r.alpha_c, "stall_reason": r.stall_reason})
        doc = {"ladder": pairs}
        if len(eps_list) >= 2:
            fit = fit_log_linear([1.0 / e for e in eps_list], [p["stall_width"] for p in pairs])
            doc["fit"] = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
    else:
        doc = _canard_json(canard_bisect(base, (args.lo, args.hi), args.max_iter))
    text = json.dumps(_json_safe(doc), indent=2, sort_keys=True)
    if args.out:
        _atomic_write(Path(args.out), text + "\n")
    print(text)
    return EXIT_OK


def cmd_print_config(args) -> int:
    print(_load_config(args.config).to_json())
    return EXIT_OK


def cmd_list(args) -> int:
    for eid, exp in EXPERIMENTS.items():
        print(f"{eid:26s} {exp.title}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatblow", description="Flat slow manifold experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run an acceptance experiment (or 'all')")
    v.add_argument("exp_id")
    v.add_argument("--config")
    v.add_argument("--out", help="output directory (default from config)")
    v.add_argument("--model", help="restrict q-invariance to one augmentation")
    v.add_argument("--threads", type=int)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="integrate a model over a parameter grid")
    s.add_argument("--model", required=True)
    s.add_argument("--param", action="append", help="fixed parameter name=value")
    s.add_argument("--grid", action="append", help="grid axis name=v1,v2,...")
    s.add_argument("--x0", help="comma-separated initial state")
    s.add_argument("--t-max", type=float)
    s.add_argument("--section", help="stop at var=value")
    s.add_argument("--method", choices=("dopri5", "radau5"), default="radau5")
    s.add_argument("--rel-tol", type=float, default=1e-10)
    s.add_argument("--abs-tol", type=float, default=1e-12)
    s.add_argument("--max-steps", type=int, default=400_000)
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("canard", help="bisect the canard explosion in alpha")
    c.add_argument("--a", type=float, default=1.0)
    c.add_argument("--b", type=float, default=1.0)
    c.add_argument("--eps", type=float, default=1e-3)
    c.add_argument("--bracket", nargs=2, type=float, metavar=("LO", "HI"), default=(-5e-3, 5e-3))
    c.add_argument("--max-iter", type=int, default=60)
    c.add_argument("--ladder", help="comma-separated eps values; emits (eps, stall width) pairs")
    c.add_argument("--out")
    c.set_defaults(func=cmd_canard)

    pc = sub.add_parser("print-config", help="dump the effective JSON configuration")
    pc.add_argument("--config")
    pc.set_defaults(func=cmd_print_config)

    ls = sub.add_parser("list", help="list experiment ids")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "bracket", None) is not None:
        args.lo, args.hi = args.bracket
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
