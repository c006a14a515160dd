"""Report assembly and serialization.

The ``results`` and ``verdict`` entries depend only on the config, so two runs of
the same config serialize them to identical bytes; versions and timing live in
separate sections.
"""
import csv
import datetime as dt
import io
import json
import math
import platform
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend
from .config import config_hash


def jsonable(x):
    """Plain JSON types; non-finite floats become the strings ``"NaN"``, ``"Infinity"``, ``"-Infinity"``."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return v
    if x is None or isinstance(x, str):
        return x
    return str(x)


def versions() -> dict:
    out = {"subdrift": __version__, "python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba", "pydantic", "PyYAML"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def build_report(command: str, doc: dict, verdict: str, results: dict, *, inputs: dict | None = None,
                 started: dt.datetime, wall_seconds: float, workers: int, config_dir: str,
                 error: dict | None = None) -> dict:
    rep = {
        "command": command,
        "verdict": verdict,
        "results": jsonable(results),
        "config": jsonable(doc),
        "config_sha256": config_hash(doc),
        "inputs": jsonable(inputs or {}),
        "versions": versions(),
        "runtime": {"backend": backend(), "workers": workers, "config_dir": config_dir,
                    "started_utc": started.isoformat(timespec="seconds"), "wall_seconds": wall_seconds},
    }
    if error is not None:
        rep["error"] = error
    return rep


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def result_payload(report: dict) -> str:
    """Canonical bytes of the reproducible part of a report."""
    return json.dumps({"verdict": report["verdict"], "results": report["results"]}, sort_keys=True,
                      separators=(",", ":"), allow_nan=False)


def table_csv(rows: list[dict]) -> str:
    fields = []
    for r in rows:
        for k in r:
            if k not in fields:
                fields.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in jsonable(r).items()})
    return buf.getvalue()


def write_outputs(report: dict, rows: list[dict], out: str | None, fmt: str, stdout) -> list[Path]:
    """JSON report to ``out`` (or stdout); with ``csv`` the grid table goes to ``out`` and the report beside it."""
    written = []
    if fmt == "json":
        text = dumps(report)
        if out:
            p = Path(out)
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text)
            written.append(p)
        else:
            stdout.write(text)
        return written
    text = table_csv(rows)
    if out:
        p = Path(out)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        side = p.with_suffix(".json") if p.suffix != ".json" else p.with_name(p.stem + ".report.json")
        side.write_text(dumps(report))
        written += [p, side]
    else:
        stdout.write(text)
    return written
