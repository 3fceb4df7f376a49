"""Throughput benchmark records: parsing, serialization and lookup.

The bundled table holds saturated-node H100 throughput measurements
(TensorRT-LLM and Llama-Nemotron publications) used to train the
throughput regression.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

HEADER = ("model", "tp_size", "quantization", "tps", "input_length", "output_length", "source")


class BenchmarkParseError(ValueError):
    """Raised when benchmark CSV text is malformed."""


@dataclass(frozen=True)
class BenchmarkRecord:
    model_name: str
    tp_size: int
    quantization: str
    tps: float
    l_in: int
    l_out: int
    source: str

    def __post_init__(self):
        if not self.model_name:
            raise ValueError("model_name must be non-empty")
        if self.tp_size < 1:
            raise ValueError(f"tp_size must be >= 1, got {self.tp_size}")
        if not self.tps > 0:
            raise ValueError(f"tps must be > 0, got {self.tps}")
        if self.l_in < 1 or self.l_out < 1:
            raise ValueError(f"token lengths must be >= 1, got l_in={self.l_in} l_out={self.l_out}")


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


_FIELD_PARSERS = {
    "tp_size": _parse_int,
    "tps": float,
    "input_length": _parse_int,
    "output_length": _parse_int,
}


def parse_benchmarks(csv_text: str) -> list[BenchmarkRecord]:
    """Parse benchmark CSV text into records, in file order.

    Row numbers in error messages count the header as row 1.
    """
    if not csv_text.strip():
        raise BenchmarkParseError("empty benchmark file")
    reader = csv.reader(io.StringIO(csv_text))
    header = tuple(h.strip() for h in next(reader))
    if header != HEADER:
        raise BenchmarkParseError(f"row 1: expected header {','.join(HEADER)!r}, got {','.join(header)!r}")

    records = []
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(HEADER):
            raise BenchmarkParseError(
                f"row {row_number}: expected {len(HEADER)} fields, got {len(row)}"
            )
        values = dict(zip(HEADER, (cell.strip() for cell in row)))
        parsed = {}
        for field, parser in _FIELD_PARSERS.items():
            try:
                parsed[field] = parser(values[field])
            except ValueError as exc:
                raise BenchmarkParseError(f"row {row_number}, field {field!r}: {exc}") from None
        try:
            record = BenchmarkRecord(
                model_name=values["model"],
                tp_size=parsed["tp_size"],
                quantization=values["quantization"],
                tps=parsed["tps"],
                l_in=parsed["input_length"],
                l_out=parsed["output_length"],
                source=values["source"],
            )
        except ValueError as exc:
            raise BenchmarkParseError(f"row {row_number}: {exc}") from None
        records.append(record)
    return records


def serialize_benchmarks(records: Iterable[BenchmarkRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in records:
        writer.writerow([r.model_name, r.tp_size, r.quantization, repr(r.tps), r.l_in, r.l_out, r.source])
    return buf.getvalue()


def load_benchmarks(path: str | Path | None = None) -> list[BenchmarkRecord]:
    """Load a benchmark file, or the bundled table when ``path`` is None."""
    if path is None:
        text = resources.files("inference_energy").joinpath("data/tps_benchmarks.csv").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_benchmarks(text)


def records_for_model(records: Iterable[BenchmarkRecord], model_name: str) -> list[BenchmarkRecord]:
    return [r for r in records if r.model_name == model_name]


def model_names(records: Iterable[BenchmarkRecord]) -> list[str]:
    """Distinct model names in first-appearance order."""
    return list(dict.fromkeys(r.model_name for r in records))
