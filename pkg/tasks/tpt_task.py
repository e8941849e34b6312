"""
TPT-48 style regression task: predict months 7-12 from months 1-6, one domain per state.
"""
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from config.tpt_splits import TptSplit
from engine.errors import InputError, ParseError
from tasks.base_task import BaseTaskBuilder, Dataset, TaskKind

TPT_HEADER = ["state", "year"] + [f"m{i}" for i in range(1, 13)]
INPUT_MONTHS = 6


@dataclass(frozen=True)
class TptRecord:
    """Monthly mean temperatures (degrees F) of one state in one year."""
    state: str
    year: int
    temperatures: Tuple[float, ...]

    def __post_init__(self):
        if len(self.temperatures) != 12:
            raise InputError(f"{self.state} {self.year}: expected 12 monthly values, got {len(self.temperatures)}")
        if not all(math.isfinite(t) for t in self.temperatures):
            raise InputError(f"{self.state} {self.year}: non-finite temperature")

    @property
    def features(self) -> Tuple[float, ...]:
        return self.temperatures[:INPUT_MONTHS]

    @property
    def targets(self) -> Tuple[float, ...]:
        return self.temperatures[INPUT_MONTHS:]


def load_tpt_csv(path: Union[str, Path]) -> List[TptRecord]:
    """
    Parse a ``state,year,m1,...,m12`` CSV.

    Raises:
        ParseError: naming the 1-based line of the first malformed or duplicate row
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"TPT csv not found: {path}")

    records: List[TptRecord] = []
    seen: Dict[Tuple[str, int], int] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != TPT_HEADER:
            raise ParseError(f"header must be '{','.join(TPT_HEADER)}'", line=1)

        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(TPT_HEADER):
                raise ParseError(f"expected {len(TPT_HEADER)} fields, got {len(row)}", line=line)
            state = row[0].strip().upper()
            try:
                year = int(row[1])
            except ValueError:
                raise ParseError(f"year '{row[1]}' is not an integer", line=line) from None
            try:
                temps = tuple(float(v) for v in row[2:])
            except ValueError as e:
                raise ParseError(f"non-numeric temperature: {e}", line=line) from None
            if not all(math.isfinite(t) for t in temps):
                raise ParseError("non-finite temperature", line=line)
            key = (state, year)
            if key in seen:
                raise ParseError(f"duplicate record for {state} {year} (first at line {seen[key]})", line=line)
            seen[key] = line
            records.append(TptRecord(state, year, temps))
    return records


def write_tpt_csv(records: Sequence[TptRecord], path: Union[str, Path]) -> Path:
    """Write records in the layout ``load_tpt_csv`` reads (full float repr, lossless)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TPT_HEADER)
        for r in records:
            writer.writerow([r.state, r.year] + [repr(float(t)) for t in r.temperatures])
    return path


def _standardize(values: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = values[mask].mean(axis=0)
    std = values[mask].std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (values - mean) / std, mean, std


def build_tpt_task(records: Sequence[TptRecord], split: TptSplit) -> Dataset:
    """
    One sample per (state, year); x = months 1-6, y = months 7-12.

    Both x and y are standardized with the source-domain mean and standard
    deviation per column; the statistics are kept in metadata so metrics can
    be reported in degrees F.
    """
    index = split.state_index
    by_state: Dict[str, List[TptRecord]] = {}
    for r in records:
        if r.state in index:
            by_state.setdefault(r.state, []).append(r)
    missing = sorted(set(index) - set(by_state))
    if missing:
        raise InputError(f"states in split '{split.name}' missing from records: {missing}")

    rows = sorted((r for rs in by_state.values() for r in rs), key=lambda r: (index[r.state], r.year))
    x = np.array([r.features for r in rows], dtype=np.float64)
    y = np.array([r.targets for r in rows], dtype=np.float64)
    u = np.array([index[r.state] for r in rows], dtype=np.int64)
    sources = split.source_domains()
    is_source = np.isin(u, sources)

    x_std, x_mean, x_scale = _standardize(x, is_source)
    y_std, y_mean, y_scale = _standardize(y, is_source)
    metadata = {
        "task_name": f"tpt48-{split.name}",
        "split": split.name,
        "states": split.states,
        "years": sorted({r.year for r in rows}),
        "x_mean": x_mean.tolist(),
        "x_std": x_scale.tolist(),
        "y_mean": y_mean.tolist(),
        "y_std": y_scale.tolist(),
    }
    return Dataset(
        graph=split.graph(),
        x=x_std,
        y=y_std,
        u=u,
        source_domains=frozenset(sources),
        task=TaskKind.REGRESSION,
        metadata=metadata,
    )


def destandardize_targets(y: np.ndarray, metadata: Dict) -> np.ndarray:
    """Map standardized regression outputs back to degrees F."""
    try:
        mean = np.asarray(metadata["y_mean"], dtype=np.float64)
        std = np.asarray(metadata["y_std"], dtype=np.float64)
    except KeyError:
        raise InputError("dataset metadata has no target standardization") from None
    return np.asarray(y, dtype=np.float64) * std + mean


class TptTaskBuilder(BaseTaskBuilder):
    """Loads the temperature CSV and applies a split."""

    def __init__(self, csv_path: Union[str, Path], split: TptSplit):
        super().__init__(f"tpt48-{split.name}", TaskKind.REGRESSION)
        self.csv_path = Path(csv_path)
        self.split = split

    def build(self) -> Dataset:
        records = load_tpt_csv(self.csv_path)
        self.logger.info(f"Loaded {len(records)} records from {self.csv_path}")
        dataset = build_tpt_task(records, self.split)
        self.logger.info(self.describe(dataset))
        return dataset
