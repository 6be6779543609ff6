"""Dataset representation, CSV ingestion, missingness generation and splitting.

A dataset holds triples (x, t, y) where t=1 marks a target-population unit
whose outcome is unobserved. Ground-truth outcomes hidden by
:func:`apply_missingness` travel in a sealed side channel that only the
evaluation code (``driftsets.bench``) reads; fitting code never touches it.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

AIRFOIL_EXPECTED_ROWS = 1503


class SchemaError(ValueError):
    """A required column is missing or the file layout is wrong."""


class ParseError(ValueError):
    """A row failed to parse; the message names the offending row."""


@dataclass(frozen=True)
class Unit:
    """One observation: covariates, target flag, optional outcome."""

    x: np.ndarray
    t: int
    y: Optional[float] = None


@dataclass(frozen=True)
class Dataset:
    """Immutable column store of units, plus the sealed ground truth.

    ``y`` is NaN wherever ``t == 1``. ``sealed_y``, when present, carries the
    full outcome vector for coverage evaluation only.
    """

    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    sealed_y: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.int64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError("dataset needs a nonempty (N, d) covariate matrix")
        if t.shape != (x.shape[0],) or y.shape != (x.shape[0],):
            raise ValueError("t and y must have one entry per row of x")
        if not np.all((t == 0) | (t == 1)):
            raise ValueError("t must be 0/1")
        if np.any(~np.isfinite(y[t == 0])):
            raise ValueError("labeled (t=0) units must carry a finite outcome")
        y = np.where(t == 1, np.nan, y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        if self.sealed_y is not None:
            s = np.asarray(self.sealed_y, dtype=np.float64)
            if s.shape != (x.shape[0],):
                raise ValueError("sealed outcomes must align with the rows")
            object.__setattr__(self, "sealed_y", s)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def labeled(self) -> np.ndarray:
        return self.t == 0

    @property
    def units(self) -> list[Unit]:
        return [
            Unit(self.x[i], int(self.t[i]), None if self.t[i] == 1 else float(self.y[i]))
            for i in range(self.n)
        ]

    def subset(self, idx: np.ndarray) -> "Dataset":
        sealed = None if self.sealed_y is None else self.sealed_y[idx]
        return Dataset(self.x[idx], self.t[idx], self.y[idx], sealed)


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint index sets covering 0..N-1, one label per part."""

    parts: tuple
    labels: tuple

    def __post_init__(self):
        if len(self.parts) != len(self.labels):
            raise ValueError("one label per part")
        allidx = np.concatenate(self.parts)
        n = allidx.size
        if np.unique(allidx).size != n or allidx.min() != 0 or allidx.max() != n - 1:
            raise ValueError("parts must partition 0..N-1")
        for p in self.parts:
            if len(p) == 0:
                raise ValueError("each part must be nonempty")

    def part(self, label: str) -> np.ndarray:
        return self.parts[self.labels.index(label)]


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, a SeedSequence, or a plain integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.default_rng(rng)
    return np.random.default_rng(np.random.SeedSequence(int(rng)))


def spawn_rng(seed: int, *path: int) -> np.random.Generator:
    """Deterministic child stream keyed by (seed, *path)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


def _parse_cell(raw: str, row_num: int, col: str) -> float:
    s = raw.strip()
    if s == "" or s.upper() == "NA":
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise ParseError(f"row {row_num}: column {col!r} value {raw!r} is not numeric") from None


def load_csv(
    path: str,
    x_cols: Sequence[str],
    y_col: Optional[str] = None,
    t_col: Optional[str] = None,
    delimiter: str = ",",
) -> Dataset:
    """Read a header-ed delimited file into a Dataset.

    Unlabeled outcomes may be encoded as an empty field or the literal "NA".
    Rows with t=1 have any present outcome dropped from the working columns
    (it is retained in the sealed channel for evaluation).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file") from None
        header = [h.strip() for h in header]
        colidx = {}
        for c in list(x_cols) + [c for c in (y_col, t_col) if c is not None]:
            if c not in header:
                raise SchemaError(f"missing required column {c!r}")
            colidx[c] = header.index(c)

        xs, ys, ts = [], [], []
        for row_num, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ParseError(f"row {row_num}: expected {len(header)} fields, got {len(row)}")
            xs.append([_parse_cell(row[colidx[c]], row_num, c) for c in x_cols])
            if any(not math.isfinite(v) for v in xs[-1]):
                raise ParseError(f"row {row_num}: covariates must be numeric and present")
            # covariate-only files (no y column) hold unlabeled queries
            t_val = 0 if y_col is not None else 1
            if t_col is not None:
                t_raw = _parse_cell(row[colidx[t_col]], row_num, t_col)
                if t_raw not in (0.0, 1.0):
                    raise ParseError(f"row {row_num}: t must be 0 or 1")
                t_val = int(t_raw)
            y_val = math.nan
            if y_col is not None:
                y_val = _parse_cell(row[colidx[y_col]], row_num, y_col)
            if t_val == 0 and not math.isfinite(y_val):
                raise ParseError(f"row {row_num}: labeled (t=0) unit has no outcome")
            ts.append(t_val)
            ys.append(y_val)

    if not xs:
        raise SchemaError("file has a header but no data rows")
    sealed = np.array(ys, dtype=np.float64)
    y = np.where(np.array(ts) == 1, np.nan, sealed)
    sealed_arg = sealed if np.any(np.isfinite(sealed[np.array(ts) == 1])) else None
    return Dataset(np.array(xs, dtype=np.float64), np.array(ts), y, sealed_arg)


def load_airfoil(path: str) -> Dataset:
    """Read the UCI airfoil self-noise file (tab separated, 5 features + response).

    Applies a natural log to the frequency (column 1) and displacement
    thickness (column 5) covariates. All units come back labeled (t=0);
    apply_missingness generates the unlabeled target sample.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        for row_num, row in enumerate(reader, start=1):
            row = [c for c in row if c.strip() != ""]
            if not row:
                continue
            if len(row) != 6:
                raise SchemaError(
                    f"row {row_num}: airfoil file needs 6 columns (5 features + response), got {len(row)}"
                )
            if row_num == 1 and any(not _is_float(c) for c in row):
                continue  # tolerate a header line
            vals = [_parse_cell(c, row_num, f"col{j+1}") for j, c in enumerate(row)]
            if any(not math.isfinite(v) for v in vals):
                raise ParseError(f"row {row_num}: missing value")
            rows.append(vals)
    if not rows:
        raise SchemaError("empty airfoil file")
    arr = np.array(rows, dtype=np.float64)
    if arr.shape[0] != AIRFOIL_EXPECTED_ROWS:
        warnings.warn(
            f"airfoil file has {arr.shape[0]} rows, expected {AIRFOIL_EXPECTED_ROWS}",
            stacklevel=2,
        )
    if np.any(arr[:, 0] <= 0) or np.any(arr[:, 4] <= 0):
        raise ParseError("frequency and displacement thickness must be positive for the log transform")
    x = arr[:, :5].copy()
    x[:, 0] = np.log(x[:, 0])
    x[:, 4] = np.log(x[:, 4])
    y = arr[:, 5]
    return Dataset(x, np.zeros(len(y), dtype=np.int64), y)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def apply_missingness(
    ds: Dataset, p: Callable[[np.ndarray], np.ndarray], rng
) -> Dataset:
    """Hide outcomes at random: t ~ Bernoulli(p(x)), y dropped where t=1.

    The pre-missingness outcomes are retained in the sealed channel so the
    evaluation code can score coverage on the hidden labels.
    """
    if np.any(~np.isfinite(ds.y)):
        raise ValueError("apply_missingness needs every unit to carry an outcome")
    gen = as_generator(rng)
    probs = np.asarray(p(ds.x), dtype=np.float64)
    if probs.shape != (ds.n,):
        probs = np.broadcast_to(probs, (ds.n,)).astype(np.float64)
    if np.any((probs < 0.0) | (probs > 1.0)) or np.any(~np.isfinite(probs)):
        raise ValueError("missingness probabilities must lie in [0, 1]")
    t = (gen.random(ds.n) < probs).astype(np.int64)
    y = np.where(t == 1, np.nan, ds.y)
    return Dataset(ds.x, t, y, sealed_y=ds.y.copy())


def split(ds: Dataset, fractions: Sequence[float], rng) -> SplitPlan:
    """Uniform random partition with floor-sized parts, remainder to the last.

    Labels default to (train, calibrate) for two parts and
    (train-score, train-nuisance, calibrate) for three.
    """
    fractions = list(fractions)
    if any(f <= 0 for f in fractions):
        raise ValueError("split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    sizes = [int(math.floor(f * ds.n)) for f in fractions]
    sizes[-1] += ds.n - sum(sizes)
    if any(s <= 0 for s in sizes):
        raise ValueError("every split part must be nonempty")
    gen = as_generator(rng)
    perm = gen.permutation(ds.n)
    parts, start = [], 0
    for s in sizes:
        parts.append(np.sort(perm[start : start + s]))
        start += s
    if len(parts) == 2:
        labels = ("train", "calibrate")
    elif len(parts) == 3:
        labels = ("train-score", "train-nuisance", "calibrate")
    else:
        labels = tuple(f"part{i}" for i in range(len(parts)))
    return SplitPlan(tuple(parts), labels)
