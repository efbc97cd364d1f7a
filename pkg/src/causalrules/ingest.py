"""Data loading, validation, and treatment categorization.

The expected observational unit is ``(W, A, Y)``: a vector of binary
baseline covariates ``W``, a categorical treatment level ``A`` in
``{0, ..., K-1}``, and a binary outcome ``Y``.  Treatment may arrive
either as an already-coded category column ``A`` or as a raw weekly
leisure-time physical activity score in MET-hours (column ``LTPA_MET``),
which is mapped onto six ordered categories by :func:`categorize_met`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

# Default covariate schema: indicators for sex, age band, self-rated
# general health, neighborhood rating, cardiac and chronic conditions,
# smoking status, and recent health decline.
DEFAULT_COVARIATES: tuple[str, ...] = (
    "FEMALE",
    "AGE.1",
    "AGE.2",
    "AGE.4",
    "AGE.5",
    "HLT.EX",
    "HLT.FAIR",
    "HLT.POOR",
    "NRB.FAIR",
    "NRB.POOR",
    "CARD",
    "CHRON",
    "SMK.CURR",
    "SMK.EX",
    "DECLINE",
)

DEFAULT_K = 6

# Upper edges of the MET-hour bands for categories 1..4; zero activity is
# its own category 0 and anything above the last edge is category 5.
MET_BREAKS: tuple[float, ...] = (10.0, 20.0, 40.0, 60.0)

MISSING_TOKENS = frozenset({"", "NA", "NaN", "nan", "."})

TREATMENT_COLUMNS = ("A", "LTPA_MET")
OUTCOME_COLUMN = "Y"


def categorize_met(met: float) -> int:
    """Map a weekly MET-hour score onto treatment categories 0..5.

    Zero activity is category 0; positive scores fall into the bands
    (0, 10], (10, 20], (20, 40], (40, 60], and (60, inf).
    """
    if not np.isfinite(met) or met < 0:
        raise ValidationError(f"MET score must be a finite nonnegative number, got {met!r}")
    if met == 0:
        return 0
    return int(np.searchsorted(MET_BREAKS, met, side="left")) + 1


@dataclass(frozen=True)
class Dataset:
    """Validated analysis sample.

    Attributes
    ----------
    w : (n, p) int8 array of binary covariates.
    a : (n,) int array of treatment levels in {0, ..., K-1}.
    y : (n,) int array of binary outcomes.
    covariate_names : column names for ``w``.
    n_treatment_levels : number of treatment categories K.
    dropped_rows : rows discarded at load time for missing fields.
    """

    w: np.ndarray
    a: np.ndarray
    y: np.ndarray
    covariate_names: tuple[str, ...]
    n_treatment_levels: int = DEFAULT_K
    dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.w, dtype=np.int8))
        a = np.ascontiguousarray(np.asarray(self.a, dtype=np.int64))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.int64))
        if w.ndim != 2:
            raise ValidationError("covariate matrix must be two-dimensional")
        n = w.shape[0]
        if n == 0:
            raise ValidationError("dataset has no rows")
        if a.shape != (n,) or y.shape != (n,):
            raise ValidationError("W, A, Y row counts do not match")
        if len(self.covariate_names) != w.shape[1]:
            raise ValidationError("covariate_names length does not match W columns")
        if len(set(self.covariate_names)) != len(self.covariate_names):
            raise ValidationError("covariate names must be unique")
        if not np.isin(w, (0, 1)).all():
            raise ValidationError("covariates must be binary 0/1")
        if not np.isin(y, (0, 1)).all():
            raise ValidationError("outcome Y must be binary 0/1")
        k = self.n_treatment_levels
        if k < 2:
            raise ValidationError("n_treatment_levels must be at least 2")
        if a.min() < 0 or a.max() >= k:
            raise ValidationError(
                f"treatment levels must lie in 0..{k - 1}, found range "
                f"[{a.min()}, {a.max()}]"
            )
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.covariate_names == other.covariate_names
            and self.n_treatment_levels == other.n_treatment_levels
            and np.array_equal(self.w, other.w)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.y, other.y)
        )

    def level_counts(self) -> np.ndarray:
        """Observed count of each treatment level, length K."""
        return np.bincount(self.a, minlength=self.n_treatment_levels)

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row-subset (or resample) the dataset by integer indices."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            w=self.w[idx],
            a=self.a[idx],
            y=self.y[idx],
            covariate_names=self.covariate_names,
            n_treatment_levels=self.n_treatment_levels,
        )


def _parse_cell(raw: str, row: int, column: str, kind: str) -> float | None:
    """Parse one CSV cell; None means missing.  ``row`` is 1-based data row."""
    token = raw.strip()
    if token in MISSING_TOKENS:
        return None
    try:
        value = float(token)
    except ValueError:
        raise ValidationError(
            f"row {row}, column {column!r}: cannot parse {raw!r} as a number"
        ) from None
    if kind == "binary":
        if value not in (0.0, 1.0):
            raise ValidationError(
                f"row {row}, column {column!r}: expected 0/1, got {raw!r}"
            )
    elif kind == "level":
        if value != int(value):
            raise ValidationError(
                f"row {row}, column {column!r}: treatment level must be an integer, got {raw!r}"
            )
    return value


def load_csv(
    path,
    covariate_names: tuple[str, ...] | list[str] | None = None,
    treatment_column: str | None = None,
    n_treatment_levels: int = DEFAULT_K,
) -> Dataset:
    """Load and validate a CSV of (W, A, Y) rows.

    The header must contain the outcome column ``Y`` and exactly one of
    the treatment columns ``A`` (already categorized) or ``LTPA_MET``
    (raw MET-hours, converted with :func:`categorize_met`).  If
    ``covariate_names`` is omitted, every other column is treated as a
    binary covariate, in header order.  Rows with any missing field are
    dropped and counted in ``Dataset.dropped_rows``; unparseable cells
    raise :class:`ValidationError` naming the row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = list(reader)

    if treatment_column is None:
        present = [c for c in TREATMENT_COLUMNS if c in header]
        if len(present) != 1:
            raise ValidationError(
                f"{path}: expected exactly one treatment column of {TREATMENT_COLUMNS}, "
                f"found {present or 'none'}"
            )
        treatment_column = present[0]
    if treatment_column not in TREATMENT_COLUMNS:
        raise ValidationError(
            f"treatment_column must be one of {TREATMENT_COLUMNS}, got {treatment_column!r}"
        )
    if treatment_column not in header:
        raise ValidationError(f"{path}: missing treatment column {treatment_column!r}")
    if OUTCOME_COLUMN not in header:
        raise ValidationError(f"{path}: missing outcome column 'Y'")

    if covariate_names is None:
        names = tuple(c for c in header if c not in (treatment_column, OUTCOME_COLUMN))
    else:
        names = tuple(covariate_names)
        missing = [c for c in names if c not in header]
        if missing:
            raise ValidationError(f"{path}: covariate columns not in header: {missing}")
    if not names:
        raise ValidationError(f"{path}: no covariate columns")

    col_index = {c: header.index(c) for c in header}
    w_idx = [col_index[c] for c in names]
    a_idx = col_index[treatment_column]
    y_idx = col_index[OUTCOME_COLUMN]
    raw_met = treatment_column == "LTPA_MET"

    w_rows: list[list[int]] = []
    a_vals: list[int] = []
    y_vals: list[int] = []
    dropped = 0
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ValidationError(
                f"row {i}: expected {len(header)} fields, got {len(row)}"
            )
        cells = [_parse_cell(row[j], i, names[k], "binary") for k, j in enumerate(w_idx)]
        a_cell = _parse_cell(
            row[a_idx], i, treatment_column, "met" if raw_met else "level"
        )
        y_cell = _parse_cell(row[y_idx], i, OUTCOME_COLUMN, "binary")
        if any(c is None for c in cells) or a_cell is None or y_cell is None:
            dropped += 1
            continue
        if raw_met:
            try:
                a_val = categorize_met(a_cell)
            except ValidationError as exc:
                raise ValidationError(f"row {i}, column 'LTPA_MET': {exc}") from None
        else:
            a_val = int(a_cell)
            if not 0 <= a_val < n_treatment_levels:
                raise ValidationError(
                    f"row {i}, column 'A': level {a_val} outside 0..{n_treatment_levels - 1}"
                )
        w_rows.append([int(c) for c in cells])
        a_vals.append(a_val)
        y_vals.append(int(y_cell))

    if not w_rows:
        raise ValidationError(f"{path}: all {dropped} data rows were dropped as incomplete")
    return Dataset(
        w=np.array(w_rows, dtype=np.int8),
        a=np.array(a_vals, dtype=np.int64),
        y=np.array(y_vals, dtype=np.int64),
        covariate_names=names,
        n_treatment_levels=n_treatment_levels,
        dropped_rows=dropped,
    )


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset as CSV with columns ``covariates..., A, Y``.

    ``load_csv`` on the result reproduces the dataset exactly.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.covariate_names) + ["A", "Y"])
        for i in range(dataset.n):
            writer.writerow(
                [int(v) for v in dataset.w[i]] + [int(dataset.a[i]), int(dataset.y[i])]
            )
