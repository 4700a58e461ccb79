"""Factor-space definitions, tabular data with missing cells, and dummy encoding.

A factor space describes the axes of the profiler: continuous ranges,
categorical level sets, and ordinal levels with numeric scores.  Training
data is held column-wise with an explicit missing mask so downstream
moment estimation can do pairwise deletion, and mixed factor types are
encoded into a single numeric matrix (reference-cell dummy coding for
categorical factors, score columns for ordinal ones).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

MISSING_TOKENS = ("", "NA")


class DataError(ValueError):
    """Malformed input data or a factor/data mismatch."""


# ---------------------------------------------------------------------------
# factor definitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Continuous:
    low: float
    high: float

    def __post_init__(self):
        if not (self.low < self.high):
            raise DataError(f"continuous range needs low < high, got [{self.low}, {self.high}]")


@dataclass(frozen=True)
class Categorical:
    levels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.levels)) != len(self.levels):
            raise DataError(f"duplicate categorical levels: {self.levels}")
        if len(self.levels) < 2:
            raise DataError("categorical factor needs at least 2 levels")


@dataclass(frozen=True)
class Ordinal:
    levels: tuple[str, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(set(self.levels)) != len(self.levels) or len(self.levels) < 2:
            raise DataError("ordinal factor needs at least 2 distinct levels")
        if len(self.scores) != len(self.levels):
            raise DataError("ordinal scores must match levels one-to-one")
        if any(b <= a for a, b in zip(self.scores, self.scores[1:])):
            raise DataError(f"ordinal scores must be strictly increasing: {self.scores}")

    def score_of(self, level: str) -> float:
        return self.scores[self.levels.index(level)]


FactorKind = Continuous | Categorical | Ordinal


@dataclass(frozen=True)
class FactorDef:
    name: str
    kind: FactorKind


@dataclass(frozen=True)
class FactorSpace:
    factors: tuple[FactorDef, ...]

    def __post_init__(self):
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate factor names: {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def factor(self, name: str) -> FactorDef:
        for f in self.factors:
            if f.name == name:
                return f
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(f.name == name for f in self.factors)

    def to_json(self) -> dict:
        out = []
        for f in self.factors:
            k = f.kind
            if isinstance(k, Continuous):
                out.append({"name": f.name, "kind": "continuous", "low": k.low, "high": k.high})
            elif isinstance(k, Categorical):
                out.append({"name": f.name, "kind": "categorical", "levels": list(k.levels)})
            else:
                out.append({"name": f.name, "kind": "ordinal",
                            "levels": list(k.levels), "scores": list(k.scores)})
        return {"factors": out}

    @staticmethod
    def from_json(doc: Mapping) -> "FactorSpace":
        factors = []
        for item in doc["factors"]:
            kind = item["kind"]
            if kind == "continuous":
                k: FactorKind = Continuous(float(item["low"]), float(item["high"]))
            elif kind == "categorical":
                k = Categorical(tuple(item["levels"]))
            elif kind == "ordinal":
                k = Ordinal(tuple(item["levels"]), tuple(float(s) for s in item["scores"]))
            else:
                raise DataError(f"unknown factor kind {kind!r}")
            factors.append(FactorDef(item["name"], k))
        return FactorSpace(tuple(factors))

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @staticmethod
    def loads(text: str) -> "FactorSpace":
        return FactorSpace.from_json(json.loads(text))


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Column:
    """One named column: float values or level codes, plus a missing mask."""
    name: str
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        if len(self.values) != len(self.missing):
            raise DataError(f"column {self.name}: values and mask lengths differ")
        if len(self.values) and not (~self.missing).any():
            raise DataError(f"column {self.name} has no non-missing cells")

    @property
    def is_numeric(self) -> bool:
        return self.values.dtype.kind == "f"

    def present(self) -> np.ndarray:
        return self.values[~self.missing]


@dataclass(frozen=True)
class Dataset:
    columns: tuple[Column, ...]

    def __post_init__(self):
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) > 1:
            raise DataError(f"ragged columns: lengths {sorted(lengths)}")

    @property
    def n(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def select(self, names: Iterable[str]) -> "Dataset":
        return Dataset(tuple(self.column(n) for n in names))

    def drop(self, names: Iterable[str]) -> "Dataset":
        dropped = set(names)
        return Dataset(tuple(c for c in self.columns if c.name not in dropped))

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(tuple(Column(c.name, c.values[idx], c.missing[idx]) for c in self.columns))

    def row_settings(self, i: int) -> dict[str, float | str | None]:
        """Factor settings for row i; missing cells map to None."""
        out: dict[str, float | str | None] = {}
        for c in self.columns:
            if c.missing[i]:
                out[c.name] = None
            else:
                v = c.values[i]
                out[c.name] = float(v) if c.is_numeric else str(v)
        return out


def numeric_column(name: str, values: Sequence[float], missing: Sequence[bool] | None = None) -> Column:
    vals = np.asarray(values, dtype=float)
    mask = np.isnan(vals) if missing is None else np.asarray(missing, dtype=bool)
    return Column(name, vals, mask)


def level_column(name: str, values: Sequence[str], missing: Sequence[bool] | None = None) -> Column:
    vals = np.asarray(values, dtype=object)
    mask = np.zeros(len(vals), dtype=bool) if missing is None else np.asarray(missing, dtype=bool)
    return Column(name, vals, mask)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def load_csv(path, schema: FactorSpace | None = None) -> Dataset:
    """Read an RFC-4180 style CSV with a header row into a Dataset.

    Empty cells and the literal "NA" (case-sensitive) are missing.  Columns
    whose non-missing cells all parse as numbers become float columns unless
    `schema` declares them categorical or ordinal; everything else is kept as
    level codes in order of first appearance.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]   # blank lines are not records
    if not rows:
        raise DataError(f"{path}: empty file (header row required)")
    header, body = rows[0], rows[1:]
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}")
    if schema is not None:
        absent = [n for n in schema.names if n not in header]
        if absent:
            raise DataError(f"{path}: schema columns absent from file: {absent}")

    columns = []
    for j, name in enumerate(header):
        cells = [row[j] for row in body]
        missing = np.array([c in MISSING_TOKENS for c in cells], dtype=bool)
        declared = schema.factor(name).kind if schema is not None and name in schema else None
        columns.append(_parse_column(name, cells, missing, declared))
    return Dataset(tuple(columns))


def _parse_column(name, cells, missing, declared) -> Column:
    if isinstance(declared, (Categorical, Ordinal)):
        return Column(name, np.array(cells, dtype=object), missing)
    parsed = np.full(len(cells), np.nan)
    numeric = True
    for i, c in enumerate(cells):
        if missing[i]:
            continue
        try:
            parsed[i] = float(c)
        except ValueError:
            numeric = False
            break
    if numeric:
        return Column(name, parsed, missing)
    if isinstance(declared, Continuous):
        raise DataError(f"column {name} declared continuous but does not parse as numbers")
    return Column(name, np.array(cells, dtype=object), missing)


def infer_factor_space(data: Dataset, ordinal: Sequence[str] = ()) -> FactorSpace:
    """Factor space from observed data: ranges for numeric columns, observed
    levels for the rest.  Columns named in `ordinal` get default scores 1..L.
    """
    if data.n < 2:
        raise DataError("need at least 2 rows to infer a factor space")
    factors = []
    for c in data.columns:
        if c.is_numeric:
            vals = c.present()
            if len(np.unique(vals)) < 2:
                raise DataError(f"column {c.name} is constant (zero range)")
            kind: FactorKind = Continuous(float(vals.min()), float(vals.max()))
        else:
            levels = _first_appearance_levels(c)
            if c.name in ordinal:
                kind = Ordinal(levels, tuple(float(i) for i in range(1, len(levels) + 1)))
            else:
                kind = Categorical(levels)
        factors.append(FactorDef(c.name, kind))
    return FactorSpace(tuple(factors))


def _first_appearance_levels(c: Column) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for v, m in zip(c.values, c.missing):
        if not m:
            seen.setdefault(str(v))
    return tuple(seen)


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncodedColumn:
    """Provenance of one encoded column: the source factor and, for an
    indicator column, the level it marks (None for identity/score columns)."""
    factor: str
    level: str | None = None


@dataclass(frozen=True)
class EncodedMatrix:
    values: np.ndarray              # (n, p) float, NaN at missing cells
    missing: np.ndarray             # (n, p) bool
    columns: tuple[EncodedColumn, ...]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column_names(self) -> tuple[str, ...]:
        return tuple(c.factor if c.level is None else f"{c.factor}[{c.level}]"
                     for c in self.columns)


def encoded_layout(space: FactorSpace) -> tuple[EncodedColumn, ...]:
    cols: list[EncodedColumn] = []
    for f in space.factors:
        if isinstance(f.kind, Categorical):
            cols.extend(EncodedColumn(f.name, lv) for lv in f.kind.levels[1:])
        else:
            cols.append(EncodedColumn(f.name))
    return tuple(cols)


def encode(data: Dataset, space: FactorSpace) -> EncodedMatrix:
    """Encode the factor columns of `data` in the order given by `space`.

    Continuous factors pass through, categorical factors become L-1 reference
    cell indicators (reference = first level), ordinal factors become their
    score column.  A missing factor cell makes every derived cell missing.
    """
    n = data.n
    blocks: list[np.ndarray] = []
    masks: list[np.ndarray] = []
    for f in space.factors:
        col = data.column(f.name)
        if isinstance(f.kind, Continuous):
            if not col.is_numeric:
                raise DataError(f"factor {f.name} is continuous but column holds level codes")
            vals = np.where(col.missing, np.nan, col.values.astype(float))[:, None]
            blocks.append(vals)
            masks.append(col.missing[:, None])
        elif isinstance(f.kind, Ordinal):
            scores = _map_levels(col, f.name, f.kind.levels,
                                 np.asarray(f.kind.scores, dtype=float))
            blocks.append(scores[:, None])
            masks.append(col.missing[:, None])
        else:
            levels = f.kind.levels
            idx = _map_levels(col, f.name, levels, np.arange(len(levels), dtype=float))
            block = np.zeros((n, len(levels) - 1))
            for j in range(1, len(levels)):
                block[:, j - 1] = idx == j
            block[col.missing, :] = np.nan
            blocks.append(block)
            masks.append(np.repeat(col.missing[:, None], len(levels) - 1, axis=1))
    values = np.hstack(blocks) if blocks else np.zeros((n, 0))
    missing = np.hstack(masks) if masks else np.zeros((n, 0), dtype=bool)
    return EncodedMatrix(values, missing, encoded_layout(space))


def _map_levels(col: Column, fname: str, levels: tuple[str, ...], codes: np.ndarray) -> np.ndarray:
    lookup = {lv: codes[i] for i, lv in enumerate(levels)}
    out = np.full(len(col.values), np.nan)
    for i, (v, m) in enumerate(zip(col.values, col.missing)):
        if m:
            continue
        key = str(v)
        if key not in lookup:
            raise DataError(f"factor {fname}: level {key!r} not in {list(levels)}")
        out[i] = lookup[key]
    return out


def encode_settings(space: FactorSpace, settings: Mapping[str, float | str | None]) -> np.ndarray:
    """Encode one point of the factor space; None settings encode as NaN."""
    parts: list[float] = []
    for f in space.factors:
        if f.name not in settings:
            raise DataError(f"missing setting for factor {f.name}")
        v = settings[f.name]
        if isinstance(f.kind, Continuous):
            parts.append(np.nan if v is None else float(v))
        elif isinstance(f.kind, Ordinal):
            parts.append(np.nan if v is None else f.kind.score_of(str(v)))
        else:
            levels = f.kind.levels
            if v is None:
                parts.extend([np.nan] * (len(levels) - 1))
            else:
                if str(v) not in levels:
                    raise DataError(f"factor {f.name}: level {v!r} not in {list(levels)}")
                parts.extend(1.0 if str(v) == lv else 0.0 for lv in levels[1:])
    return np.asarray(parts, dtype=float)


def decode_row(space: FactorSpace, row: np.ndarray) -> dict[str, float | str]:
    """Invert encode_settings for a complete encoded row."""
    settings: dict[str, float | str] = {}
    j = 0
    for f in space.factors:
        if isinstance(f.kind, Continuous):
            settings[f.name] = float(row[j])
            j += 1
        elif isinstance(f.kind, Ordinal):
            score = float(row[j])
            matches = [lv for lv, s in zip(f.kind.levels, f.kind.scores) if s == score]
            if not matches:
                raise DataError(f"factor {f.name}: no level with score {score}")
            settings[f.name] = matches[0]
            j += 1
        else:
            levels = f.kind.levels
            block = row[j:j + len(levels) - 1]
            hot = np.nonzero(block == 1.0)[0]
            settings[f.name] = levels[0] if len(hot) == 0 else levels[int(hot[0]) + 1]
            j += len(levels) - 1
    return settings


# ---------------------------------------------------------------------------
# splits and missing-value injection
# ---------------------------------------------------------------------------

def holdout_split(data: Dataset, n_holdout: int, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint (train, holdout) partition, reproducible for a seed."""
    n = data.n
    if not 0 < n_holdout < n:
        raise DataError(f"n_holdout must be in (0, {n}), got {n_holdout}")
    perm = np.random.default_rng(seed).permutation(n)
    hold, train = np.sort(perm[:n_holdout]), np.sort(perm[n_holdout:])
    return data.take(train), data.take(hold)


def inject_missing(data: Dataset, fraction: float, seed: int,
                   columns: Sequence[str] | None = None) -> Dataset:
    """Set a random `fraction` of the cells in the chosen columns to missing."""
    rng = np.random.default_rng(seed)
    names = set(columns) if columns is not None else set(data.names)
    out = []
    for c in data.columns:
        if c.name not in names:
            out.append(c)
            continue
        knock = rng.random(len(c.values)) < fraction
        mask = c.missing | knock
        if mask.all():
            mask[rng.integers(len(mask))] = False
        vals = c.values.copy()
        if c.is_numeric:
            vals[mask] = np.nan
        out.append(Column(c.name, vals, mask))
    return Dataset(tuple(out))
