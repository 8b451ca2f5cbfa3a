"""Plan, trace and report files.

Plans and traces are written with shortest round-trip floats so they read
back bit-for-bit. Report series use 12 significant digits. Every file starts
with ``# key: value`` lines, one of which holds the resolved config as JSON.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .epi import AllocationPlan, Trace
from .errors import DimensionMismatch, ParseError
from .tables import format_number, format_report_number, parse_float, read_meta, read_rows, write_table


def config_json(config: dict | None) -> str:
    return json.dumps(config or {}, sort_keys=True, separators=(",", ":"))


def _meta(config, **extra) -> dict[str, str]:
    meta = {k: str(v) for k, v in extra.items()}
    meta["config"] = config_json(config)
    return meta


def write_plan(path, plan: AllocationPlan, labels, config: dict | None = None) -> None:
    labels = list(labels)
    if len(labels) != plan.n:
        raise DimensionMismatch(f"{len(labels)} labels for a {plan.n}-county plan")
    meta = _meta(config, t0=plan.t0, T=plan.T, mode=plan.mode, budget=format_number(plan.budget))
    rows = ([int(d), *map(format_number, row)] for d, row in zip(plan.days, plan.rates))
    write_table(path, ["day", *labels], rows, meta)


def read_plan(path, labels=None) -> tuple[AllocationPlan, tuple[str, ...]]:
    """Read a plan file. With ``labels`` the columns are reordered to match."""
    meta = read_meta(path)
    rows = read_rows(path)
    header = rows[0][1:]
    if labels is not None:
        labels = list(labels)
        if len(header) != len(labels):
            raise DimensionMismatch(f"{path}: plan has {len(header)} counties, scenario has {len(labels)}")
        if sorted(header) != sorted(labels):
            raise DimensionMismatch(f"{path}: plan counties {header} differ from scenario counties {labels}")
        order = [header.index(lab) for lab in labels]
    else:
        labels = header
        order = list(range(len(header)))
    days, rates = [], []
    for k, row in enumerate(rows[1:]):
        if len(row) != len(header) + 1:
            raise DimensionMismatch(f"{path}: line {k + 2} has {len(row) - 1} rates, expected {len(header)}")
        days.append(int(parse_float(row[0], path=path, line=k + 2)))
        vals = [parse_float(c, path=path, line=k + 2) for c in row[1:]]
        rates.append([vals[j] for j in order])
    if not days:
        raise ParseError("plan has no rows", path=path)
    try:
        t0 = int(meta.get("t0", days[0]))
        T = int(meta.get("T", days[-1]))
        budget = float(meta.get("budget", "inf"))
    except ValueError as exc:
        raise ParseError(f"bad plan metadata: {exc}", path=path) from None
    if days != list(range(t0, T + 1)):
        raise DimensionMismatch(f"{path}: plan days {days[0]}..{days[-1]} do not cover {t0}..{T}")
    plan = AllocationPlan(t0, T, np.array(rates), budget, meta.get("mode", "screening"))
    return plan, tuple(labels)


TRACE_COLUMNS = ("day", "county", "s", "h", "c", "r", "new_confirmed", "allocated_rate")


def write_trace(path, trace: Trace, labels, config: dict | None = None) -> None:
    """Long format, one row per (day, county); day ``t0-1`` has no counts or rates."""
    labels = list(labels)

    def rows():
        for k, day in enumerate(trace.days):
            for i, lab in enumerate(labels):
                state = [format_number(x[k, i]) for x in (trace.s, trace.h, trace.c, trace.r)]
                if k == 0:
                    extra = ["", ""]
                else:
                    extra = [format_number(trace.new_confirmed[k - 1, i]), format_number(trace.rates[k - 1, i])]
                yield [int(day), lab, *state, *extra]

    meta = _meta(config, t0=trace.t0, T=trace.T, mode=trace.mode)
    write_table(path, TRACE_COLUMNS, rows(), meta)


def read_trace(path) -> tuple[Trace, tuple[str, ...]]:
    meta = read_meta(path)
    rows = read_rows(path)
    if tuple(rows[0]) != TRACE_COLUMNS:
        raise ParseError(f"trace header must be {','.join(TRACE_COLUMNS)}", path=path, line=1)
    body = rows[1:]
    labels = []
    for row in body:
        if row[1] in labels:
            break
        labels.append(row[1])
    n = len(labels)
    if n == 0 or len(body) % n:
        raise ParseError("trace rows do not form whole days", path=path)
    days = len(body) // n
    vals = np.zeros((days, n, 6))
    for idx, row in enumerate(body):
        k, i = divmod(idx, n)
        if row[1] != labels[i]:
            raise ParseError(f"county {row[1]!r} out of order", path=path, line=idx + 2)
        for j, cell in enumerate(row[2:]):
            vals[k, i, j] = parse_float(cell, path=path, line=idx + 2) if cell else 0.0
    t0 = int(meta.get("t0", int(body[0][0]) + 1))
    T = int(meta.get("T", int(body[-1][0])))
    trace = Trace(
        t0,
        T,
        vals[:, :, 0],
        vals[:, :, 1],
        vals[:, :, 2],
        vals[:, :, 3],
        vals[1:, :, 4],
        vals[1:, :, 5],
        meta.get("mode", "screening"),
    )
    return trace, tuple(labels)


def write_report(out_dir, report, labels, config: dict | None = None) -> list[Path]:
    """Write the comparison tables; returns the paths written."""
    out_dir = Path(out_dir)
    names = list(report.cumulative)
    meta = _meta(config, strategies=",".join(names))
    paths = []

    p = out_dir / "report_cumulative.csv"
    rows = (
        [int(d), *(format_report_number(report.cumulative[s][k]) for s in names)]
        for k, d in enumerate(report.days)
    )
    write_table(p, ["day", *names], rows, meta)
    paths.append(p)

    p = out_dir / "report_counties.csv"
    rows = (
        [lab, *(format_report_number(report.county_totals[s][i]) for s in names)]
        for i, lab in enumerate(labels)
    )
    write_table(p, ["county", *names], rows, meta)
    paths.append(p)

    if report.allocations is not None:
        p = out_dir / "report_allocations.csv"
        rows = []
        for k, d in enumerate(report.days):
            for i, lab in enumerate(labels):
                if report.allocations[k, i] > 0:
                    rows.append([int(d), lab, format_report_number(report.allocations[k, i])])
        write_table(p, ["day", "county", "rate"], rows, meta)
        paths.append(p)
    return paths


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
