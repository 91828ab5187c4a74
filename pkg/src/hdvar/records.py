"""CSV rows emitted by the command-line tools, and their lossless reader."""

from __future__ import annotations

import csv
import dataclasses
import typing
from dataclasses import dataclass
from pathlib import Path

from hdvar import __version__


@dataclass(frozen=True)
class Table1Row:
    n: int
    p: int
    eta0_2: float
    sigma0_2: float
    eta1_2: float
    sigma1_2: float
    replications: int
    error_rate: float
    std_err: float
    design_seed: int


@dataclass(frozen=True)
class Figure1RawRow:
    design: int
    design_seed: int
    error_rate: float


@dataclass(frozen=True)
class Figure1HistRow:
    bin_left: float
    bin_right: float
    count: int
    density: float
    kde: float


@dataclass(frozen=True)
class VarianceCheckRow:
    n: int
    p: int
    sigma2: float
    beta_norm2: float
    replications: int
    mean: float
    mean_se: float
    variance: float
    formula: float
    relative_gap: float
    mean_ok: bool
    variance_ok: bool
    passed: bool


@dataclass(frozen=True)
class BoundCheckRow:
    n: int
    p: int
    xi: float
    exceedance: float
    std_err: float
    g_mean: float
    rhs: float
    ratio: float
    within_rhs: bool
    passed: bool


@dataclass(frozen=True)
class MomentCheckRow:
    check: str
    estimate: float
    std_err: float
    target: float
    z: float
    z_limit: float
    passed: bool


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _parse(text: str, kind):
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"not a boolean: {text!r}")
        return text == "true"
    return kind(text)


def write_csv(path: Path, rows: typing.Sequence, meta: dict | None = None) -> None:
    """Write dataclass rows with ``#`` comment lines carrying provenance."""
    if not rows:
        raise ValueError("no rows to write")
    names = [f.name for f in dataclasses.fields(rows[0])]
    lines = [f"# hdvar {__version__}"]
    lines += [f"# {key}: {value}" for key, value in (meta or {}).items()]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([_format(getattr(row, name)) for name in names])


def read_csv(path: Path, row_type: type) -> tuple[list, dict[str, str]]:
    """Inverse of :func:`write_csv`: returns (rows, comment metadata)."""
    hints = typing.get_type_hints(row_type)
    meta: dict[str, str] = {}
    body = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition(": ")
                if sep:
                    meta[key] = value
            else:
                body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    rows = [row_type(**{name: _parse(cell, hints[name]) for name, cell in zip(header, cells)})
            for cells in reader]
    return rows, meta
