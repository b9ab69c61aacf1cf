"""Persistence: cache keys, successor/policy files and CSV exports."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grid import StateGrid, SuccessorTable

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def cache_key(system, grid: StateGrid, substeps, strict: bool = False) -> str:
    """Content hash of everything that determines a successor table.

    Floats are serialised with ``repr`` (shortest round-trip form), so the
    key is identical across platforms and sensitive to the last digit.
    """
    if isinstance(substeps, (int, np.integer)):
        substeps = [int(substeps)] * system.n_modes
    payload = {
        "v": FORMAT_VERSION,
        "system": system.describe(),
        "grid": grid.describe(),
        "substeps": [int(n) for n in substeps],
        "strict": bool(strict),
    }
    return hashlib.sha256(_canonical(payload).encode()).hexdigest()


def _cache_path(cache_dir, key) -> Path:
    return Path(cache_dir) / f"succ-{key[:32]}.npz"


def save_cached_successors(cache_dir, system, table: SuccessorTable) -> Path:
    key = cache_key(system, table.grid, table.substeps, table.strict)
    path = _cache_path(cache_dir, key)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez_compressed(
        tmp,
        key=np.array(key),
        entries=table.entries,
        substeps=np.asarray(table.substeps, dtype=np.int64),
        violations=table.violations,
        tau=np.float64(table.tau),
        strict=np.bool_(table.strict),
    )
    os.replace(tmp, path)
    return path


def load_cached_successors(cache_dir, system, grid: StateGrid, substeps, strict: bool = False):
    """Return the cached table for these inputs, or ``None`` on a miss."""
    key = cache_key(system, grid, substeps, strict)
    path = _cache_path(cache_dir, key)
    if not path.exists():
        return None
    try:
        with np.load(path) as data:
            if str(data["key"]) != key or data["entries"].shape != (grid.size, system.n_modes):
                log.warning("ignoring stale successor cache %s", path)
                return None
            table = SuccessorTable(
                grid,
                data["entries"].astype(np.int32),
                tuple(int(n) for n in data["substeps"]),
                float(data["tau"]),
                bool(data["strict"]),
                data["violations"].astype(np.int64),
            )
    except (OSError, KeyError, ValueError) as exc:
        log.warning("unreadable successor cache %s: %s", path, exc)
        return None
    log.info("successor table loaded from cache %s", path)
    return table


def save_policy(path, policy) -> None:
    """Write a policy table with its header (system, K, k, tau, cost, provenance, grid key)."""
    header = dict(policy.meta)
    header["grid_key"] = policy.grid_key
    header["cost_label"] = policy.cost_label
    header["format"] = FORMAT_VERSION
    with open(path, "wb") as fh:
        np.savez_compressed(fh, policy=policy.policy, header=np.array(json.dumps(header, sort_keys=True)))


def load_policy(path, expected_key: str | None = None):
    from .synthesis import PolicyTable

    with np.load(path) as data:
        header = json.loads(str(data["header"]))
        arr = data["policy"]
    if expected_key is not None and header.get("grid_key") != expected_key:
        raise ValidationError(f"policy file {path} was built for a different system/grid")
    meta = {k: v for k, v in header.items() if k not in ("grid_key", "cost_label", "format")}
    return PolicyTable(arr, header["cost_label"], header["grid_key"], meta)


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def write_control_csv(path, pattern, system) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["segment", "start_t", "mode", "control_value"])
        for n, u in enumerate(pattern.modes):
            w.writerow([n + 1, repr(n * pattern.tau), u, repr(float(system.mode_values[u]))])


SUMMARY_FIELDS = ("method", "K", "y0", "value", "metric", "wall_seconds", "provenance", "hypothesis_ok", "robust")


def write_summary_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow([
                r["method"],
                r["K"],
                " ".join(repr(float(v)) for v in r["y0"]),
                _num(r["value"]),
                _num(r.get("metric")),
                _num(r.get("wall_seconds")),
                r.get("provenance", ""),
                r.get("hypothesis_ok", ""),
                r.get("robust", ""),
            ])


def read_summary_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_replan_log(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "cell", "horizon", "mode"])
        w.writerows(rows)


def write_plot_script(path, dim: int, trajectory_csv="trajectory.csv", control_csv="control.csv",
                      title="") -> None:
    """gnuplot script with three panels: first state plane, second state plane, control."""
    if dim >= 4:
        p1, p2 = ("2:3", "y1", "y2"), ("4:5", "y3", "y4")
    elif dim >= 2:
        p1, p2 = ("2:3", "y1", "y2"), ("1:2", "t", "y1")
    else:
        p1, p2 = ("1:2", "t", "y1"), ("1:2", "t", "y1")
    lines = [
        "# generated by eulersynth",
        "set datafile separator ','",
        "set terminal pngcairo size 1200,900",
        "set output 'plot.png'",
        "set multiplot layout 2,2" + (f" title '{title}'" if title else ""),
        f"set xlabel '{p1[1]}'; set ylabel '{p1[2]}'",
        f"plot '{trajectory_csv}' every ::1 using {p1[0]} with lines notitle",
        f"set xlabel '{p2[1]}'; set ylabel '{p2[2]}'",
        f"plot '{trajectory_csv}' every ::1 using {p2[0]} with lines notitle",
        "set origin 0,0; set size 1,0.5",
        "set xlabel 't'; set ylabel 'control'",
        f"plot '{control_csv}' every ::1 using 2:4 with steps notitle",
        "unset multiplot",
    ]
    Path(path).write_text("\n".join(lines) + "\n")
