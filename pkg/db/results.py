"""results.csv: one row per measurement, fixed header, lossless floats."""
import csv
import io
import math
from pathlib import Path
from typing import Iterable, List

from models.experiment import Metric

HEADER = ["subcommand", "metric", "index", "value", "predicted", "tolerance", "passed"]


def format_float(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def render(subcommand: str, metrics: Iterable[Metric]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for m in metrics:
        writer.writerow([
            subcommand,
            m.name,
            "" if m.index is None else m.index,
            format_float(m.value),
            format_float(m.predicted),
            format_float(m.tolerance),
            "" if m.passed is None else ("true" if m.passed else "false"),
        ])
    return buf.getvalue()


def write_results(path: Path, subcommand: str, metrics: Iterable[Metric]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(render(subcommand, metrics))


def read_results(path: Path) -> List[dict]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    return rows
