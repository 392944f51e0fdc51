"""CSV traces, key=value summaries and the plain-text comparison report."""
from __future__ import annotations

import csv
from pathlib import Path

from .sim import COLUMNS, ScenarioResult


class ExportError(OSError):
    pass


def export_csv(result: ScenarioResult, path) -> Path:
    """Header plus one row per control sample; floats written with repr so
    the file round-trips exactly."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            cols = [result.trace[c] for c in COLUMNS]
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {c: [float(r[i]) for r in body] for i, c in enumerate(header)}


def summary_lines(result: ScenarioResult, prefix: str = ""):
    lines = [f"{prefix}name={result.name}", f"{prefix}cost_mode={result.cost_mode}",
             f"{prefix}seed={result.seed}"]
    g = result.gains
    lines += [f"{prefix}K_p={g.K_p!r}", f"{prefix}K_i={g.K_i!r}", f"{prefix}K_d={g.K_d!r}"]
    for k, v in result.summary.items():
        lines.append(f"{prefix}{k}={v!r}")
    return lines


def write_summary(results, path) -> Path:
    path = Path(path)
    lines = []
    for r in results:
        lines += summary_lines(r, f"{r.cost_mode}." if len(results) > 1 else "")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    return path


_METRICS = (("speed MSE [m^2/s^2]", "speed_mse"),
            ("position MSE [m^2]", "position_mse"),
            ("heading MSE [rad^2]", "heading_mse"),
            ("max |y - y_ref| [m]", "max_position_error"),
            ("max |psi - psi_ref| [rad]", "max_heading_error"),
            ("constraint violations", "violations"),
            ("MPC fallbacks", "fallbacks"))

POSITION_TARGET = 0.05


def report(results) -> str:
    """Side-by-side metrics table, one column per run."""
    names = [r.cost_mode for r in results]
    width = max(26, *(len(m[0]) + 2 for m in _METRICS))
    out = [f"scenario {results[0].name}, seed {results[0].seed}",
           "".ljust(width) + "".join(n.rjust(14) for n in names)]
    for label, key in _METRICS:
        cells = []
        for r in results:
            v = r.summary.get(key, float("nan"))
            cells.append(f"{v:14d}" if isinstance(v, int) else f"{v:14.4e}")
        out.append(label.ljust(width) + "".join(cells))
    for r in results:
        if r.cost_mode == "enhanced":
            ok = r.summary["max_position_error"] < POSITION_TARGET
            out.append(f"enhanced max position error < {POSITION_TARGET} m: "
                       f"{'pass' if ok else 'fail'}")
        if r.aborted:
            out.append(f"{r.cost_mode}: aborted, {r.abort_reason}")
    return "\n".join(out) + "\n"
