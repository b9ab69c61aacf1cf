"""Command-line front end.

Every subcommand reads an optional INI config and lets flags override it::

    [run]
    benchmark = mri
    K = 10
    output = out
    cache = yes
    force = no

    [initial]
    y0 = 0 1 0 1; 0 1 0.1 1

    [constants]
    source = auto        ; auto | affine | estimate | file
    samples = 2000
    margin = 0.05
    file = constants.csv

    [disturbance]
    magnitude = 0

    [mri]                ; benchmark parameters, any field of the builder
    alpha = 0.99

Errors are reported on stderr as one JSON object and mapped to exit codes
2 (validation), 3 (hypothesis), 4 (invariance) and 5 (numerical domain).
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as eio
from .benchmarks import BENCHMARKS, MriParameters, OracleInstance, brute_force_optimal, build_mri, get_benchmark
from .bounds import (
    DEFAULT_MARGIN,
    DisturbanceSpec,
    check_hypothesis,
    delta,
    delta_disturbed,
    format_constants,
    parse_constants,
    system_constants,
)
from .errors import EulerSynthError, ValidationError
from .receding import run_receding
from .synthesis import prepare, synthesize

log = logging.getLogger("eulersynth")

METHODS = ("robust", "receding")
CONSTANT_SOURCES = ("auto", "affine", "estimate", "file")


@dataclass
class RunConfig:
    benchmark: str = "mri"
    K: int | None = None
    k: int | None = None
    tau: float | None = None
    method: str = "robust"
    y0: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    constants_source: str = "auto"
    samples: int = 2000
    margin: float = DEFAULT_MARGIN
    constants_file: str | None = None
    disturbance: float = 0.0
    output: str = "out"
    cache: bool = True
    cache_dir: str | None = None
    force: bool = False
    strict: bool = False

    def validate(self) -> None:
        if self.benchmark not in BENCHMARKS:
            raise ValidationError(f"unknown benchmark {self.benchmark!r}; known: {sorted(BENCHMARKS)}")
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.K is not None and (isinstance(self.K, bool) or int(self.K) != self.K or self.K < 1):
            raise ValidationError(f"K must be an integer >= 1, got {self.K!r}")
        if self.k is not None and self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k!r}")
        if self.tau is not None and not self.tau > 0:
            raise ValidationError(f"tau must be > 0, got {self.tau!r}")
        if self.constants_source not in CONSTANT_SOURCES:
            raise ValidationError(f"constants source must be one of {CONSTANT_SOURCES}")
        if self.constants_source == "file" and not self.constants_file:
            raise ValidationError("constants source 'file' needs a file name")
        if self.samples < 2 or self.margin < 0:
            raise ValidationError("need samples >= 2 and margin >= 0")
        DisturbanceSpec(self.disturbance)


def _parse_states(text: str) -> list:
    states = []
    for chunk in text.split(";"):
        chunk = chunk.replace(",", " ").split()
        if chunk:
            try:
                states.append([float(s) for s in chunk])
            except ValueError:
                raise ValidationError(f"cannot parse initial state {' '.join(chunk)!r}") from None
    return states


def _parse_scalar(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    parts = text.replace(",", " ").split()
    try:
        return [float(p) for p in parts]
    except ValueError:
        return text


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    if not parser.read(path):
        raise ValidationError(f"cannot read config file {path}")
    cfg = RunConfig()
    try:
        if parser.has_section("run"):
            r = parser["run"]
            cfg.benchmark = r.get("benchmark", cfg.benchmark)
            cfg.method = r.get("method", cfg.method)
            if "K" in r:
                cfg.K = int(r["K"])
            if "k" in r:
                cfg.k = int(r["k"])
            if "tau" in r:
                cfg.tau = float(r["tau"])
            cfg.output = r.get("output", cfg.output)
            cfg.cache = _bool(r.get("cache", "yes"))
            cfg.cache_dir = r.get("cache_dir", cfg.cache_dir)
            cfg.force = _bool(r.get("force", "no"))
            cfg.strict = _bool(r.get("strict", "no"))
        if parser.has_section("initial") and "y0" in parser["initial"]:
            cfg.y0 = _parse_states(parser["initial"]["y0"])
        if parser.has_section("constants"):
            c = parser["constants"]
            cfg.constants_source = c.get("source", cfg.constants_source)
            cfg.samples = int(c.get("samples", cfg.samples))
            cfg.margin = float(c.get("margin", cfg.margin))
            cfg.constants_file = c.get("file", cfg.constants_file)
        if parser.has_section("disturbance"):
            cfg.disturbance = float(parser["disturbance"].get("magnitude", "0"))
        if parser.has_section(cfg.benchmark):
            cfg.params = {k: _parse_scalar(v) for k, v in parser[cfg.benchmark].items()}
    except ValueError as exc:
        raise ValidationError(f"bad value in {path}: {exc}") from None
    return cfg


def build_problem(cfg: RunConfig):
    """Benchmark for the config plus its list of initial states."""
    params = dict(cfg.params)
    if cfg.benchmark == "mri":
        names = {f.name for f in dataclasses.fields(MriParameters)}
        unknown = set(params) - names
        if unknown:
            raise ValidationError(f"unknown mri parameters {sorted(unknown)}")
        if cfg.k is not None:
            params["k"] = cfg.k
        if cfg.tau is not None:
            params["tau"] = cfg.tau
        bench = build_mri(MriParameters(**params), K=cfg.K or 10)
    else:
        if cfg.k is not None:
            params["k"] = cfg.k
        if cfg.tau is not None:
            params["tau"] = cfg.tau
        if cfg.K is not None:
            params["K"] = cfg.K
        try:
            bench = get_benchmark(cfg.benchmark, **params)
        except TypeError as exc:
            raise ValidationError(f"bad parameters for {cfg.benchmark}: {exc}") from None
    states = [np.asarray(y, dtype=float) for y in cfg.y0] or [bench.y0]
    for y in states:
        if y.size != bench.system.dim:
            raise ValidationError(f"initial state {y.tolist()} has dimension {y.size}, system has {bench.system.dim}")
    return bench, states


def resolve_constants(cfg: RunConfig, system):
    if cfg.constants_source == "file":
        try:
            consts = parse_constants(Path(cfg.constants_file).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read constants file: {exc}") from None
        if len(consts) != system.n_modes:
            raise ValidationError(f"constants file lists {len(consts)} modes, system has {system.n_modes}")
        return consts
    return system_constants(system, cfg.constants_source, cfg.samples, cfg.margin)


def _cache_dir(cfg: RunConfig):
    if not cfg.cache:
        return None
    return cfg.cache_dir or str(Path(cfg.output) / "cache")


def _run_dirs(out: Path, n: int) -> list:
    if n == 1:
        return [out]
    return [out / f"run-{i:03d}" for i in range(n)]


def run(cfg: RunConfig) -> list:
    """Execute the configured method for every initial state; returns the summary rows."""
    cfg.validate()
    bench, states = build_problem(cfg)
    system, grid = bench.system, bench.grid()
    consts = resolve_constants(cfg, system)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    prepared = prepare(system, grid, bench.cost, bench.k, consts, cfg.force, cfg.strict, _cache_dir(cfg))
    eio.save_policy(out / "policy.npz", prepared.policy)
    rows = []
    for y0, d in zip(states, _run_dirs(out, len(states))):
        d.mkdir(parents=True, exist_ok=True)
        row = {"K": grid.K, "y0": y0.tolist(), "provenance": prepared.provenance,
               "hypothesis_ok": prepared.hypothesis.ok}
        if cfg.method == "robust":
            res = synthesize(system, grid, bench.cost, bench.k, y0, prepared=prepared)
            res.trajectory.to_csv(d / "trajectory.csv")
            pattern = res.pattern
            row.update(method="robust", robust="yes", value=res.value, metric=res.metric,
                       wall_seconds=res.wall_seconds)
        else:
            res = run_receding(system, grid, bench.cost, bench.k, y0, prepared=prepared)
            res.trajectory.to_csv(d / "trajectory.csv")
            eio.write_replan_log(d / "replan_log.csv", res.log)
            pattern = res.applied_modes
            row.update(method="receding", robust="no", value=res.value, metric=res.metric,
                       wall_seconds=res.wall_seconds)
        eio.write_control_csv(d / "control.csv", pattern, system)
        eio.write_summary_csv(d / "summary.csv", [row])
        eio.write_plot_script(d / "plot.gp", system.dim, title=f"{system.name} {cfg.method} K={grid.K}")
        rows.append(row)
    if len(states) > 1:
        eio.write_summary_csv(out / "summary.csv", rows)
    return rows


def _print_rows(rows) -> None:
    for r in rows:
        metric = "" if r.get("metric") is None else f" metric={r['metric']!r}"
        print(f"{r['method']:9s} K={r['K']} y0={r['y0']} value={r['value']!r}{metric} "
              f"provenance={r['provenance']} H={r['hypothesis_ok']}")


def cmd_run(cfg: RunConfig, args) -> int:
    _print_rows(run(cfg))
    return 0


def cmd_compare(cfg: RunConfig, args) -> int:
    """Both methods on every initial state, one summary table."""
    cfg.validate()
    bench, states = build_problem(cfg)
    system, grid = bench.system, bench.grid()
    consts = resolve_constants(cfg, system)
    prepared = prepare(system, grid, bench.cost, bench.k, consts, cfg.force, cfg.strict, _cache_dir(cfg))
    rows = []
    for y0 in states:
        common = {"K": grid.K, "y0": y0.tolist(), "provenance": prepared.provenance,
                  "hypothesis_ok": prepared.hypothesis.ok}
        rob = synthesize(system, grid, bench.cost, bench.k, y0, prepared=prepared)
        rec = run_receding(system, grid, bench.cost, bench.k, y0, prepared=prepared)
        rows.append({"method": "robust", "robust": "yes", "value": rob.value, "metric": rob.metric,
                     "wall_seconds": rob.wall_seconds, **common})
        rows.append({"method": "receding", "robust": "no", "value": rec.value, "metric": rec.metric,
                     "wall_seconds": rec.wall_seconds, **common})
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    eio.write_summary_csv(out / "summary.csv", rows)
    _print_rows(rows)
    return 0


def cmd_bounds(cfg: RunConfig, args) -> int:
    """Certificates per mode and the ball radius over one step."""
    cfg.validate()
    bench, _ = build_problem(cfg)
    system, grid = bench.system, bench.grid()
    consts = resolve_constants(cfg, system)
    eps = grid.eps
    report = check_hypothesis(consts, eps, system.tau)
    w = DisturbanceSpec(cfg.disturbance)
    print(f"# {system.name} K={grid.K} eps={eps!r} tau={system.tau!r} H={'ok' if report.ok else 'fails'}")
    print("mode,lambda,G,alpha,max_step,substeps,H")
    for u, (c, cert, n) in enumerate(zip(consts, report.certificates, report.substeps)):
        if cert is None:
            print(f"{u},{c.osl!r},,,,,no")
        else:
            print(f"{u},{c.osl!r},{cert.G!r},{cert.alpha!r},{cert.max_step!r},{n},{'yes' if cert.satisfied_H else 'no'}")
    # radius over one Euler sub-step, which is where the contraction is certified
    print("mode,t,delta" + (",delta_disturbed" if cfg.disturbance > 0 else ""))
    for u, c in enumerate(consts):
        n = report.substeps[u] or 1
        for t in np.linspace(0.0, system.tau / n, args.points).tolist():
            line = f"{u},{t!r},{delta(c, eps, t)!r}"
            if cfg.disturbance > 0:
                line += f",{delta_disturbed(c, eps, w, t)!r}"
            print(line)
    return 0 if report.ok else 3


def cmd_estimate(cfg: RunConfig, args) -> int:
    cfg.validate()
    bench, _ = build_problem(cfg)
    text = format_constants(resolve_constants(cfg, bench.system))
    if args.write:
        Path(args.write).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_oracle(cfg: RunConfig, args) -> int:
    """Compare the DP pattern with exhaustive enumeration over the grid graph."""
    cfg.validate()
    bench, states = build_problem(cfg)
    system, grid = bench.system, bench.grid()
    consts = resolve_constants(cfg, system)
    prepared = prepare(system, grid, bench.cost, bench.k, consts, cfg.force, cfg.strict)
    mismatches = 0
    for y0 in states:
        res = synthesize(system, grid, bench.cost, bench.k, y0, prepared=prepared)
        pat, val = brute_force_optimal(OracleInstance(prepared.table, bench.cost, bench.k, res.start_cell), args.cap)
        same = pat == res.pattern and val == res.graph_value
        mismatches += not same
        print(f"y0={y0.tolist()} dp={list(res.pattern.modes)} value={res.graph_value!r} "
              f"oracle={list(pat.modes)} value={val!r} {'match' if same else 'MISMATCH'}")
    return 0 if mismatches == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eulersynth", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="INI config file")
        sp.add_argument("-b", "--benchmark", choices=sorted(BENCHMARKS))
        sp.add_argument("-K", type=int, dest="K", help="cells per axis")
        sp.add_argument("-k", type=int, dest="k", help="pattern length")
        sp.add_argument("--tau", type=float)
        sp.add_argument("--y0", action="append", help="initial state, e.g. '0 1 0 1' (repeatable)")
        sp.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                        help="benchmark parameter override")
        sp.add_argument("--constants", choices=CONSTANT_SOURCES)
        sp.add_argument("--constants-file")
        sp.add_argument("--samples", type=int)
        sp.add_argument("--margin", type=float)
        sp.add_argument("--disturbance", type=float)
        sp.add_argument("-o", "--output")
        sp.add_argument("--no-cache", action="store_true")
        sp.add_argument("--force", action="store_true", help="continue when the contraction hypothesis fails")
        sp.add_argument("--strict", action="store_true", help="require every Euler sub-step to stay in the box")
        return sp

    common(sub.add_parser("synthesize", help="robust optimal pattern")).set_defaults(func=cmd_run, method="robust")
    common(sub.add_parser("receding", help="receding-horizon variant")).set_defaults(func=cmd_run, method="receding")
    sp = common(sub.add_parser("bounds", help="certificates and error-ball radii"))
    sp.add_argument("--points", type=int, default=5)
    sp.set_defaults(func=cmd_bounds, method=None)
    sp = common(sub.add_parser("estimate-constants", help="print per-mode constants"))
    sp.add_argument("--write", help="also write them to this file")
    sp.set_defaults(func=cmd_estimate, method=None)
    common(sub.add_parser("compare", help="robust vs receding table")).set_defaults(func=cmd_compare, method=None)
    sp = common(sub.add_parser("oracle", help="check DP against enumeration"))
    sp.add_argument("--cap", type=int, default=10**5)
    sp.set_defaults(func=cmd_oracle, method=None)
    return p


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.benchmark:
        if args.benchmark != cfg.benchmark:
            cfg.params = {}
        cfg.benchmark = args.benchmark
    for name in ("K", "k", "tau"):
        if getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    if args.method:
        cfg.method = args.method
    if args.y0:
        cfg.y0 = [s for text in args.y0 for s in _parse_states(text)]
    for item in args.set:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects NAME=VALUE, got {item!r}")
        cfg.params[name.strip()] = _parse_scalar(value)
    if args.constants:
        cfg.constants_source = args.constants
    if args.constants_file:
        cfg.constants_file = args.constants_file
        if not args.constants:
            cfg.constants_source = "file"
    if args.samples is not None:
        cfg.samples = args.samples
    if args.margin is not None:
        cfg.margin = args.margin
    if args.disturbance is not None:
        cfg.disturbance = args.disturbance
    if args.output:
        cfg.output = args.output
    if args.no_cache:
        cfg.cache = False
    cfg.force = cfg.force or args.force
    cfg.strict = cfg.strict or args.strict
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(config_from_args(args), args)
    except EulerSynthError as exc:
        err = {"error_class": exc.error_class, "exit_code": exc.exit_code, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
