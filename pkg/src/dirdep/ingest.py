"""Reading numeric data and turning it into rank-based pseudo-observations."""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "IngestError",
    "TiePolicy",
    "BivariateSample",
    "PseudoSample",
    "ColumnTable",
    "read_csv",
    "read_table",
    "to_pseudo",
]


class IngestError(ValueError):
    """Unreadable, malformed or too small input."""


class TiePolicy(str, enum.Enum):
    SEEDED_JITTER = "jitter"
    MID_RANK = "midrank"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BivariateSample:
    xs: np.ndarray
    ys: np.ndarray

    def __init__(self, xs: Sequence[float], ys: Sequence[float]):
        xs, ys = _frozen(xs), _frozen(ys)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise IngestError("xs and ys must be 1-d sequences of equal length")
        if xs.size < 2:
            raise IngestError(f"need at least 2 observations, got {xs.size}")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise IngestError("sample contains NaN or infinite values")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return int(self.xs.size)

    def __len__(self):
        return self.n


@dataclass(frozen=True, eq=False)
class PseudoSample:
    """Normalised ranks ``(rank(x)/n, rank(y)/n)``."""

    u: np.ndarray
    v: np.ndarray
    tie_policy_used: TiePolicy

    @property
    def n(self) -> int:
        return int(self.u.size)

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.u.tolist(), self.v.tolist()))

    def __eq__(self, other):
        if not isinstance(other, PseudoSample):
            return NotImplemented
        return (
            self.tie_policy_used == other.tie_policy_used
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
        )

    __hash__ = None


@dataclass(frozen=True)
class ColumnTable:
    names: tuple[str, ...]
    columns: dict
    endogenous: str

    def __post_init__(self):
        if self.endogenous not in self.columns:
            raise IngestError(f"endogenous column {self.endogenous!r} not present")
        lengths = {len(c) for c in self.columns.values()}
        if len(lengths) != 1:
            raise IngestError("table is not rectangular")

    @property
    def n_rows(self) -> int:
        return len(self.columns[self.endogenous])

    @property
    def exogenous(self) -> list[str]:
        return [c for c in self.names if c != self.endogenous]

    def pair(self, x_col: str) -> BivariateSample:
        return BivariateSample(self.columns[x_col], self.columns[self.endogenous])


# ---------------------------------------------------------------------- #
# CSV reading

def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _load_rows(path) -> tuple[list[str] | None, list[tuple[int, list[str]]]]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            raw = [(i, row) for i, row in enumerate(csv.reader(fh), start=1)]
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    raw = [(i, [c.strip() for c in row]) for i, row in raw if any(c.strip() for c in row)]
    if not raw:
        raise IngestError(f"{path} is empty")
    first = raw[0][1]
    header = None
    if any(c and not _is_number(c) for c in first):
        header = first
        raw = raw[1:]
    return header, raw


def _resolve(col, header, width) -> int:
    if isinstance(col, int) or (isinstance(col, str) and col.isdigit() and
                                (header is None or col not in header)):
        idx = int(col)
        if not 0 <= idx < width:
            raise IngestError(f"column index {idx} out of range (0..{width - 1})")
        return idx
    if header is None:
        raise IngestError(f"column {col!r} given by name but the file has no header")
    try:
        return header.index(col)
    except ValueError:
        raise IngestError(f"no column named {col!r}; available: {', '.join(header)}") from None


def _parse_columns(rows, indices, drop_incomplete):
    """Parse the selected columns; return a list of value lists."""
    out = [[] for _ in indices]
    for lineno, row in rows:
        cells = [row[i] if i < len(row) else "" for i in indices]
        if any(c == "" for c in cells):
            if drop_incomplete:
                continue
            raise IngestError(f"row {lineno}: missing value (use drop_incomplete to skip such rows)")
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise IngestError(f"row {lineno}: cannot parse {cells!r} as numbers") from None
        if not all(math.isfinite(v) for v in vals):
            raise IngestError(f"row {lineno}: non-finite value in {cells!r}")
        for acc, v in zip(out, vals):
            acc.append(v)
    if len(out[0]) < 2:
        raise IngestError(f"need at least 2 complete rows, got {len(out[0])}")
    return out


def read_csv(path, x_col=0, y_col=1, drop_incomplete: bool = False) -> BivariateSample:
    """Read two numeric columns (by name or 0-based index) from a CSV file."""
    header, rows = _load_rows(path)
    width = max(len(r) for _, r in rows) if rows else 0
    ix, iy = _resolve(x_col, header, width), _resolve(y_col, header, width)
    xs, ys = _parse_columns(rows, [ix, iy], drop_incomplete)
    return BivariateSample(xs, ys)


def read_table(path, endogenous, drop_incomplete: bool = False) -> ColumnTable:
    """Read every column of a headed CSV file; ``endogenous`` names the response."""
    header, rows = _load_rows(path)
    width = max(len(r) for _, r in rows) if rows else 0
    if header is None:
        header = [str(i) for i in range(width)]
    iy = _resolve(endogenous, header, width)
    values = _parse_columns(rows, list(range(len(header))), drop_incomplete)
    columns = {name: _frozen(col) for name, col in zip(header, values)}
    return ColumnTable(tuple(header), columns, header[iy])


# ---------------------------------------------------------------------- #
# ranks

def _jitter_ranks(values: np.ndarray, keys: np.ndarray) -> np.ndarray:
    order = np.lexsort((keys, values))
    ranks = np.empty(values.size, dtype=float)
    ranks[order] = np.arange(1, values.size + 1, dtype=float)
    return ranks


def to_pseudo(sample: BivariateSample, tie_policy=TiePolicy.SEEDED_JITTER,
              seed: int = 0) -> PseudoSample:
    """Rank-transform a sample to ``(rank(x)/n, rank(y)/n)``.

    Under ``SEEDED_JITTER`` ties are broken by a random permutation drawn
    from ``seed``; tie-free input gives the same ranks for every seed.
    ``MID_RANK`` averages tied ranks, which breaks the exact uniformity of
    the rank margins.
    """
    tie_policy = TiePolicy(tie_policy)
    n = sample.n
    if tie_policy is TiePolicy.SEEDED_JITTER:
        rng = np.random.default_rng(seed)
        kx, ky = rng.random(n), rng.random(n)
        rx, ry = _jitter_ranks(sample.xs, kx), _jitter_ranks(sample.ys, ky)
    else:
        rx = rankdata(sample.xs, method="average")
        ry = rankdata(sample.ys, method="average")
        if np.unique(sample.xs).size < n or np.unique(sample.ys).size < n:
            warnings.warn(
                "mid-ranks on tied data: rank margins are no longer exactly uniform",
                stacklevel=2,
            )
    return PseudoSample(_frozen(rx / n), _frozen(ry / n), tie_policy)
