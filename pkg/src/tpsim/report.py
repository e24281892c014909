"""CSV reports for simulation runs and the storage-overhead table."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from tpsim import hints as hintmod
from tpsim import victim
from tpsim.errors import SchemaError
from tpsim.metadata import MAX_TABLE_ENTRIES, storage_report
from tpsim.simulate import SimReport

REPORT_HEADER = [
    "run_id",
    "policy",
    "demand_accesses",
    "demand_misses",
    "issued",
    "useful",
    "coverage",
    "accuracy",
    "traffic_proxy",
]
PER_PC_HEADER = ["run_id", "policy", "pc", "issued", "useful", "demand_misses", "accuracy"]
JOINED_HEADER = REPORT_HEADER + ["coverage_delta"]


def _row(report: SimReport) -> List[str]:
    return [
        report.run_id,
        report.policy,
        str(report.demand_accesses),
        str(report.demand_misses),
        str(report.issued),
        str(report.useful),
        f"{report.coverage:.6f}",
        f"{report.accuracy:.6f}",
        str(report.traffic_proxy),
    ]


def _write_csv(rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def format_report(reports: Iterable[SimReport]) -> str:
    return _write_csv([REPORT_HEADER] + [_row(r) for r in reports])


def format_per_pc(report: SimReport) -> str:
    rows = [PER_PC_HEADER]
    for pc in sorted(report.per_pc):
        s = report.per_pc[pc]
        acc = s.useful / s.issued if s.issued else 0.0
        rows.append([report.run_id, report.policy, f"{pc:#x}", str(s.issued), str(s.useful), str(s.demand_misses), f"{acc:.6f}"])
    return _write_csv(rows)


def write_report(path, reports: Iterable[SimReport]) -> None:
    Path(path).write_text(format_report(reports))


def read_rows(path) -> List[Dict[str, str]]:
    """Rows of a report CSV; the header must match exactly."""
    path = Path(path)
    reader = csv.reader(io.StringIO(path.read_text()))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError(f"{path}: empty report") from None
    if header != REPORT_HEADER:
        raise SchemaError(f"{path}: header {header} does not match {REPORT_HEADER}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(REPORT_HEADER):
            raise SchemaError(f"{path}:{lineno}: expected {len(REPORT_HEADER)} fields, got {len(rec)}")
        row = dict(zip(REPORT_HEADER, rec))
        try:
            for key in ("demand_accesses", "demand_misses", "issued", "useful", "traffic_proxy"):
                int(row[key])
            float(row["coverage"])
            float(row["accuracy"])
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from None
        rows.append(row)
    return rows


def join_reports(paths: Sequence) -> str:
    """Concatenate report rows and add each row's coverage gain over the first row of its run_id."""
    if not paths:
        raise ValueError("at least one report is required")
    rows = []
    for p in paths:
        rows.extend(read_rows(p))
    first: Dict[str, float] = {}
    out = [JOINED_HEADER]
    for row in rows:
        cov = float(row["coverage"])
        ref = first.setdefault(row["run_id"], cov)
        out.append([row[k] for k in REPORT_HEADER] + [f"{cov - ref:.6f}"])
    return _write_csv(out)


def storage_table(
    table_entries: int = MAX_TABLE_ENTRIES,
    hint_entries: int = hintmod.HINT_BUFFER_ENTRIES,
    vb_entries: int = victim.DEFAULT_ENTRIES,
) -> List[tuple]:
    """(structure, bits, bytes, KB) rows for the hardware added on top of the LLC."""
    rows = [
        ("replacement_state", storage_report(table_entries).replacement_bits),
        ("hint_buffer", hintmod.storage_bits(hint_entries)),
        ("victim_buffer", victim.storage_bits(vb_entries)),
    ]
    return [(name, bits, bits // 8, bits / 8 / 1024) for name, bits in rows]


def format_storage_table(rows=None) -> str:
    rows = storage_table() if rows is None else rows
    out = [["structure", "bits", "bytes", "kb"]]
    for name, bits, nbytes, kb in rows:
        out.append([name, str(bits), str(nbytes), f"{kb:.2f}"])
    return _write_csv(out)
