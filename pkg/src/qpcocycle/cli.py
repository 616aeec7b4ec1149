"""``qpcocycle`` command line: le, bundles, edge, sweep, verify, fit.

Outputs go to ``<out>/<hash>/`` where the hash covers every setting that
influences the numbers.  With the cache on, a command whose output files
already exist reads them back instead of recomputing; the log line
``kernel_calls=N`` reports how many kernel dispatches the run made.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import asymptotics as asy
from ._backend import BACKEND_NAME, kernel_counter
from .bundles import compute_bundles, difference_field, write_bundle_csv
from .config import ExperimentConfig
from .edge import EdgeEstimate, find_edge, schrodinger_bracket
from .errors import ConfigError, NonConvergence, QPCocycleError
from .lyapunov import estimate_record, le_from_bundle, le_norm_growth

log = logging.getLogger("qpcocycle")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def _dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2)


def _write_json(path, obj):
    Path(path).write_text(_dumps(obj) + "\n")


class Run:
    """Per-invocation context: config, output root, cache switch, job count."""

    def __init__(self, cfg: ExperimentConfig, out: Path, cache: bool, jobs: int):
        self.cfg, self.out, self.cache, self.jobs = cfg, out, cache, jobs

    def folder(self, *sections, extra=None):
        path = self.out / self.cfg.digest(*sections, extra=extra)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def cached(self, *paths):
        hit = self.cache and all(Path(p).exists() for p in paths)
        if hit:
            log.info("cache hit: %s", ", ".join(str(p) for p in paths))
        return hit

    # -- edge shared by edge and sweep ---------------------------------------
    def edge(self):
        folder = self.folder("family", "numerics", extra="edge")
        path = folder / "edge.json"
        if self.cached(path):
            return EdgeEstimate.from_dict(json.loads(path.read_text())), path
        n = self.cfg.numerics
        if n.edge_lo is not None:
            lo, hi = n.edge_lo, n.edge_hi
        else:
            lo, hi = schrodinger_bracket(self.cfg.potential())
        log.info("bisecting [%r, %r] to width %g", lo, hi, n.edge_tol)
        est = find_edge(self.cfg.parameter_family(), lo, hi, n.edge_tol, N=n.edge_grid, bundle_tol=n.bundle_tol,
                        cap=n.cap, log=log.debug)
        path.write_text(est.to_json(indent=2) + "\n")
        return est, path


def cmd_le(run: Run, t):
    cfg = run.cfg
    n = cfg.numerics
    t = cfg.family.energy if t is None else t
    folder = run.folder("family", "numerics", extra={"cmd": "le", "t": t})
    path = folder / "le.json"
    if run.cached(path):
        result = json.loads(path.read_text())
    else:
        fam = cfg.parameter_family(t)
        ng = le_norm_growth(fam, n.norm_steps, n.burn_in)
        result = {"t": t, "norm_growth": estimate_record(ng)}
        try:
            b = compute_bundles(fam, n.grid, tol=n.bundle_tol, cap=n.cap, retries=1)
            lb = le_from_bundle(fam, b)
        except NonConvergence as exc:
            result["bundle_integral"] = {"error": f"{type(exc).__name__}: {exc}"}
            result["status"] = "bundle method failed"
        else:
            diff = abs(ng.value - lb.value)
            comb = ng.error_estimate + lb.error_estimate
            result["bundle_integral"] = estimate_record(lb)
            result["difference"] = diff
            result["combined_error"] = comb
            result["agree"] = bool(diff < 3 * comb)
            result["status"] = "ok"
        _write_json(path, result)
    print(_dumps(result))
    return EXIT_OK if result.get("status") == "ok" else EXIT_NUMERIC


def cmd_bundles(run: Run, t):
    cfg = run.cfg
    n = cfg.numerics
    t = cfg.family.energy if t is None else t
    folder = run.folder("family", "numerics", extra={"cmd": "bundles", "t": t})
    csv_path, meta_path = folder / "bundles.csv", folder / "summary.json"
    if run.cached(csv_path, meta_path):
        meta = json.loads(meta_path.read_text())
    else:
        fam = cfg.parameter_family(t)
        b = compute_bundles(fam, n.grid, tol=n.bundle_tol, cap=n.cap, retries=1)
        fld = difference_field(b)
        write_bundle_csv(csv_path, b.thetas, b.r_u, b.r_s)
        meta = {
            "t": t, "grid": int(b.thetas.size), "n_uniform": b.n_uniform, "d_min": fld.d_min, "theta_c": fld.theta_c,
            "cone_constant": b.cone_constant, "residual_u": b.residual_u, "residual_s": b.residual_s,
            "cauchy_u": b.cauchy_u, "cauchy_s": b.cauchy_s, "iterations_used": b.iterations_used,
            "decay_rate": b.decay_rate, "refinement_width": b.refinement_width,
            "multiple_minima": fld.multiple_minima, "bundles_csv": csv_path.name,
        }
        _write_json(meta_path, meta)
    print(_dumps(meta))
    return EXIT_OK


def cmd_edge(run: Run):
    est, path = run.edge()
    print(_dumps({"t0": est.t0, "bracket": list(est.bracket), "width": est.width, "edge_json": str(path)}))
    return EXIT_OK


def _sweep_summary(cfg, records, t0, verify_report=None):
    out = {"t0": t0, "n_records": len(records), "n_failed": sum(not r.ok for r in records)}
    for name, fn in (("d_min_fit", asy.distance_fit), ("holder_fit", asy.holder_check)):
        try:
            out[name] = asdict(fn(records))
        except QPCocycleError as exc:
            out[name] = {"error": str(exc)}
    try:
        out["L_edge"] = asy.extrapolate_edge_L(records)
    except QPCocycleError as exc:
        out["L_edge"] = {"error": str(exc)}
    try:
        k1, k2, ratio = asy.theorem_bound_check(records)
        out.update(K1=k1, K2=k2, bound_ratio=ratio)
    except QPCocycleError as exc:
        out["bound_check"] = {"error": str(exc)}
    out["integration_mismatch"] = asy.integration_consistency(records)
    if verify_report is not None:
        out["assumptions"] = verify_report
    return out


def _verify_digest(report):
    return {
        "growth_rate_a": report.growth_rate_a, "C1": report.quad_constant_C1, "C2": report.interval_length_ratio,
        "outside_floor_ok": report.outside_floor_ok, "S_plus_max": report.S_plus_max,
        "S_minus_max": report.S_minus_max, "S_bound": report.S_bound,
        "violations": [v.clause for v in report.violations],
    }


def _sweep_records(run: Run):
    cfg = run.cfg
    n, s = cfg.numerics, cfg.sweep
    folder = run.folder(extra="sweep")
    csv_path, rec_path, sum_path = folder / "sweep.csv", folder / "records.json", folder / "summary.json"
    if run.cached(csv_path, rec_path, sum_path):
        return asy.records_from_json(json.loads(rec_path.read_text())), json.loads(sum_path.read_text()), folder
    t0 = s.t0 if s.t0 is not None else run.edge()[0].t0
    fam = cfg.parameter_family()
    records = asy.run_sweep(fam, t0, cfg.gaps(), N=n.grid, tol=n.bundle_tol, quad_rtol=n.quad_tol, fd=s.fd,
                            jobs=run.jobs, progress=lambda r: log.info("gap=%.3e status=%s", r.gap, r.status))
    digest = None
    if s.verify_gap is not None:
        try:
            digest = _verify_digest(asy.verify_at(fam.at(t0 - s.verify_gap), N=n.grid, tol=n.bundle_tol))
        except QPCocycleError as exc:
            digest = {"error": f"{type(exc).__name__}: {exc}"}
    summary = _sweep_summary(cfg, records, t0, digest)
    asy.write_sweep_csv(csv_path, records)
    _write_json(rec_path, asy.records_to_json(records))
    _write_json(sum_path, summary)
    return records, summary, folder


def cmd_sweep(run: Run):
    records, summary, folder = _sweep_records(run)
    print(_dumps({**summary, "sweep_csv": str(folder / "sweep.csv")}))
    return EXIT_OK


def cmd_verify(run: Run, t, gap):
    cfg = run.cfg
    n = cfg.numerics
    if gap is not None:
        t0 = cfg.sweep.t0 if cfg.sweep.t0 is not None else run.edge()[0].t0
        t = t0 - gap
    t = cfg.family.energy if t is None else t
    folder = run.folder("family", "numerics", extra={"cmd": "verify", "t": t})
    path = folder / "verify.json"
    if run.cached(path):
        report = json.loads(path.read_text())
    else:
        rep = asy.verify_at(cfg.parameter_family(t), N=n.grid, tol=n.bundle_tol)
        report = {"t": t, **rep.to_dict()}
        _write_json(path, report)
    print(_dumps(report))
    return EXIT_OK


def cmd_fit(run: Run, input_path):
    if input_path is None:
        records, summary, _ = _sweep_records(run)
        t0 = summary.get("t0")
    else:
        records = asy.read_sweep_csv(input_path)
        t0 = None
    print(_dumps(_sweep_summary(run.cfg, records, t0)))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="INI experiment file")
    common.add_argument("--jobs", type=int, metavar="N", default=argparse.SUPPRESS, help="worker processes")
    common.add_argument("--no-cache", action="store_true", default=argparse.SUPPRESS, help="always recompute")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output root directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="qpcocycle", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("le", "Lyapunov exponent by both methods"), ("bundles", "invariant slope fields"),
                           ("verify", "assumption report at one parameter")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--t", type=float, default=None, help="parameter (energy); default family.energy")
        if name == "verify":
            sp.add_argument("--gap", type=float, default=None, help="evaluate at t0 - gap instead of --t")
    sub.add_parser("edge", parents=[common], help="locate the edge t0 by bisection")
    sub.add_parser("sweep", parents=[common], help="sweep t0 - gap and fit power laws")
    fp = sub.add_parser("fit", parents=[common], help="fits and bound check for a sweep")
    fp.add_argument("--input", default=None, help="sweep.csv to read (default: this config's sweep)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    verbose = getattr(args, "verbose", False)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.DEBUG if verbose else logging.INFO)
    kernel_counter.reset()
    try:
        cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
        if getattr(args, "out", None):
            cfg = replace(cfg, output=replace(cfg.output, directory=args.out))
        jobs = getattr(args, "jobs", None) or os.cpu_count() or 1
        if jobs < 1:
            raise ConfigError("--jobs", "must be >= 1")
        cache = cfg.output.cache and not getattr(args, "no_cache", False)
        run = Run(cfg, Path(cfg.output.directory), cache, jobs)
        log.info("backend=%s config=%s", BACKEND_NAME, cfg.digest())
        cmd = args.command
        if cmd == "le":
            code = cmd_le(run, args.t)
        elif cmd == "bundles":
            code = cmd_bundles(run, args.t)
        elif cmd == "edge":
            code = cmd_edge(run)
        elif cmd == "sweep":
            code = cmd_sweep(run)
        elif cmd == "verify":
            code = cmd_verify(run, args.t, args.gap)
        else:
            code = cmd_fit(run, args.input)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QPCocycleError as exc:
        log.error("numerical failure: %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERIC
    finally:
        log.info("kernel_calls=%d", kernel_counter.calls)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
