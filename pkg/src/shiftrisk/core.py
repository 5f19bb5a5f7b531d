"""Data model: loss functions, the sample container, validation, CSV I/O.

The estimation sample pools rows from the source population (``d == 1``,
outcomes observed) and the target population (``d == 0``, outcomes
usually unobserved). Sampling weights ``w`` rescale each row to the
population it was drawn from; unweighted analyses use ``w == 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataValidationError, InvalidArgumentError, SchemaError

SQUARED = "squared"
ABSOLUTE = "absolute"
LOSSES = (SQUARED, ABSOLUTE)


def expit(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=float)
    # exp of a non-positive number never overflows
    a = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + a), a / (1.0 + a))
    if out.ndim == 0:
        return float(out)
    return out


def loss_eval(loss: str, y, pred):
    """Elementwise loss ``L(y, pred)``.

    ``squared`` is ``(y - pred)**2`` (the Brier score when ``y`` is a
    binary outcome and ``pred`` a probability); ``absolute`` is
    ``|y - pred|``. Both are symmetric in their arguments.
    """
    y = np.asarray(y, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(pred))):
        raise InvalidArgumentError("loss_eval requires finite y and pred")
    if loss == SQUARED:
        return (y - pred) ** 2
    if loss == ABSOLUTE:
        return np.abs(y - pred)
    raise InvalidArgumentError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """One pooled sample of source and target rows.

    Parameters
    ----------
    x : ndarray, shape (n, d)
        Covariates. A 1-D array is treated as a single covariate.
    d : ndarray, shape (n,)
        Population indicator: 1 = source, 0 = target.
    y : ndarray, shape (n,), optional
        Outcomes; NaN marks a missing outcome. Defaults to all missing.
    w : ndarray, shape (n,), optional
        Sampling weights. Defaults to 1 for every row.
    cluster : ndarray, shape (n,), optional
        Primary sampling unit labels, used by the clustered bootstrap.
    stratum : ndarray, shape (n,), optional
        Sampling stratum labels; requires ``cluster``.
    """

    x: np.ndarray
    d: np.ndarray
    y: np.ndarray | None = None
    w: np.ndarray | None = None
    cluster: np.ndarray | None = None
    stratum: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise InvalidArgumentError(f"x must be 1-D or 2-D, got ndim={x.ndim}")
        n = x.shape[0]

        def vec(name, value, dtype=float):
            arr = np.asarray(value, dtype=dtype)
            if arr.shape != (n,):
                raise InvalidArgumentError(
                    f"{name} must have shape ({n},), got {arr.shape}"
                )
            return arr

        d = vec("d", self.d)
        y = np.full(n, np.nan) if self.y is None else vec("y", self.y)
        w = np.ones(n) if self.w is None else vec("w", self.w)
        cluster = None if self.cluster is None else vec("cluster", self.cluster, None)
        stratum = None if self.stratum is None else vec("stratum", self.stratum, None)

        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "d", _frozen(d))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "w", _frozen(w))
        object.__setattr__(self, "cluster", None if cluster is None else _frozen(cluster))
        object.__setattr__(self, "stratum", None if stratum is None else _frozen(stratum))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]

    @property
    def source_mask(self) -> np.ndarray:
        return self.d == 1

    @property
    def target_mask(self) -> np.ndarray:
        return self.d == 0

    @property
    def n_source(self) -> int:
        return int(np.count_nonzero(self.source_mask))

    @property
    def n_target(self) -> int:
        return int(np.count_nonzero(self.target_mask))

    def take(self, idx) -> "Dataset":
        """Row subset (or resample, when ``idx`` repeats rows)."""
        idx = np.asarray(idx)
        return Dataset(
            x=self.x[idx],
            d=self.d[idx],
            y=self.y[idx],
            w=self.w[idx],
            cluster=None if self.cluster is None else self.cluster[idx],
            stratum=None if self.stratum is None else self.stratum[idx],
        )


@dataclass(frozen=True)
class PredictionModel:
    """A frozen, externally fitted prediction model.

    ``column_subset`` names the covariate columns the model consumes,
    in order; ``predictor`` maps the selected (n, k) sub-matrix to an
    n-vector of predictions. Evaluation never mutates the model.
    """

    column_subset: tuple[str, ...]
    predictor: object  # callable (n, k) -> (n,)

    def __post_init__(self):
        object.__setattr__(self, "column_subset", tuple(self.column_subset))
        if not callable(self.predictor):
            raise InvalidArgumentError("predictor must be callable")


def select_model_inputs(dataset: Dataset, covariates, model: PredictionModel) -> np.ndarray:
    """Apply ``model`` to its named columns of ``dataset``, row-wise.

    ``covariates`` gives the dataset's column names in ``x`` order.
    """
    covariates = list(covariates)
    idx = []
    for name in model.column_subset:
        if name not in covariates:
            raise SchemaError(f"model column {name!r} not found in the data")
        idx.append(covariates.index(name))
    sub = dataset.x[:, idx] if idx else np.empty((dataset.n, 0))
    out = np.asarray(model.predictor(sub), dtype=float)
    if out.shape != (dataset.n,):
        raise InvalidArgumentError(
            f"predictor must return shape ({dataset.n},), got {out.shape}"
        )
    return out


@dataclass(frozen=True)
class Violation:
    """One validation failure; ``row`` is None for dataset-level checks."""

    field: str
    message: str
    row: int | None = None

    def __str__(self) -> str:
        loc = "" if self.row is None else f"row {self.row}: "
        return f"{loc}{self.field}: {self.message}"


def validate_dataset(
    dataset: Dataset,
    *,
    require_target_y: bool = False,
    require_both_groups: bool = True,
    survey: bool = False,
) -> list[Violation]:
    """Collect every rule violation in ``dataset``.

    Returns an empty list when the dataset is usable. Rules: covariates
    and weights finite, weights positive, ``d`` binary, outcomes present
    and finite on source rows (and on target rows when
    ``require_target_y``), cluster labels nested within strata, and,
    when ``require_both_groups``, at least one row from each population.
    In ``survey`` mode every source row must have weight exactly 1 (the
    source sample is unweighted by design; only target rows carry
    survey weights).
    """
    out: list[Violation] = []
    bad_x = ~np.isfinite(dataset.x).all(axis=1)
    for i in np.flatnonzero(bad_x):
        out.append(Violation("x", "covariates must be finite", int(i)))
    bad_d = ~((dataset.d == 0) | (dataset.d == 1))
    for i in np.flatnonzero(bad_d):
        out.append(Violation("d", f"population indicator must be 0 or 1, got {dataset.d[i]}", int(i)))
    bad_w = ~np.isfinite(dataset.w) | (dataset.w <= 0)
    for i in np.flatnonzero(bad_w):
        out.append(Violation("w", f"weights must be positive and finite, got {dataset.w[i]}", int(i)))
    if survey:
        for i in np.flatnonzero(dataset.source_mask & (dataset.w != 1)):
            out.append(
                Violation("w", f"source rows must have weight 1 in survey mode, got {dataset.w[i]}", int(i))
            )

    missing_y = np.isnan(dataset.y)
    inf_y = ~missing_y & ~np.isfinite(dataset.y)
    for i in np.flatnonzero(inf_y):
        out.append(Violation("y", "outcome must be finite", int(i)))
    need_y = dataset.source_mask.copy()
    if require_target_y:
        need_y |= dataset.target_mask
    for i in np.flatnonzero(need_y & missing_y):
        which = "source" if dataset.d[i] == 1 else "target"
        out.append(Violation("y", f"outcome required on {which} rows", int(i)))

    if dataset.stratum is not None and dataset.cluster is None:
        out.append(Violation("stratum", "stratum labels require cluster labels"))
    if dataset.cluster is not None and dataset.stratum is not None:
        seen: dict = {}
        for i in range(dataset.n):
            c, s = dataset.cluster[i], dataset.stratum[i]
            if c in seen and seen[c] != s:
                out.append(
                    Violation("cluster", f"cluster {c!r} appears in strata {seen[c]!r} and {s!r}", int(i))
                )
            else:
                seen.setdefault(c, s)

    if require_both_groups:
        if dataset.n_source == 0:
            out.append(Violation("d", "no source rows (d == 1) in dataset"))
        if dataset.n_target == 0:
            out.append(Violation("d", "no target rows (d == 0) in dataset"))
    return out


def require_valid(dataset: Dataset, **kwargs) -> None:
    """Raise :class:`DataValidationError` unless ``dataset`` validates."""
    violations = validate_dataset(dataset, **kwargs)
    if violations:
        raise DataValidationError(violations)


# ---------------------------------------------------------------------------
# CSV ingestion

_MISSING_TOKENS = {"", "na", "nan"}
_RESERVED = {"D": "d", "Y": "y", "W": "w", "CLUSTER": "cluster", "STRATUM": "stratum", "GHAT": "ghat"}


class LoadedData(NamedTuple):
    dataset: Dataset
    ghat: np.ndarray | None
    covariates: list[str]


def read_dataset_csv(path) -> LoadedData:
    """Load a dataset from a CSV file with a header row.

    Column names are matched case-insensitively against the reserved
    names ``d`` (required), ``y``, ``w``, ``cluster``, ``stratum`` and
    ``ghat`` (precomputed model predictions). Every other column is a
    covariate, in file order. Empty, ``na`` and ``nan`` cells are
    missing values; they are only permitted in the ``y`` column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise SchemaError(f"{path}: file is empty")
    header = [name.strip() for name in rows[0]]
    data = rows[1:]
    if not data:
        raise SchemaError(f"{path}: no data rows")

    roles: dict[str, int] = {}
    covariate_cols: list[tuple[str, int]] = []
    for j, name in enumerate(header):
        role = _RESERVED.get(name.upper())
        if role is not None:
            if role in roles:
                raise SchemaError(f"{path}: duplicate column {name!r}")
            roles[role] = j
        else:
            if name in (c for c, _ in covariate_cols):
                raise SchemaError(f"{path}: duplicate covariate column {name!r}")
            covariate_cols.append((name, j))
    if "d" not in roles:
        raise SchemaError(f"{path}: required column 'd' is missing")

    n = len(data)
    width = len(header)
    for i, row in enumerate(data):
        if len(row) != width:
            raise SchemaError(
                f"{path}: data row {i + 1} has {len(row)} fields, header has {width}"
            )

    def parse(name: str, j: int, allow_missing: bool) -> np.ndarray:
        out = np.empty(n)
        for i, row in enumerate(data):
            tok = row[j].strip()
            if tok.lower() in _MISSING_TOKENS:
                if allow_missing:
                    out[i] = np.nan
                    continue
                raise SchemaError(f"{path}: column {name!r} data row {i + 1}: missing value")
            try:
                out[i] = float(tok)
            except ValueError:
                raise SchemaError(
                    f"{path}: column {name!r} data row {i + 1}: cannot parse {tok!r} as a number"
                ) from None
        return out

    x = np.empty((n, len(covariate_cols)))
    for k, (name, j) in enumerate(covariate_cols):
        x[:, k] = parse(name, j, allow_missing=False)
    d = parse(header[roles["d"]], roles["d"], allow_missing=False)
    y = parse(header[roles["y"]], roles["y"], allow_missing=True) if "y" in roles else None
    w = parse(header[roles["w"]], roles["w"], allow_missing=False) if "w" in roles else None
    ghat = parse(header[roles["ghat"]], roles["ghat"], allow_missing=False) if "ghat" in roles else None

    def labels(role: str) -> np.ndarray | None:
        if role not in roles:
            return None
        j = roles[role]
        return np.asarray([row[j].strip() for row in data], dtype=object)

    dataset = Dataset(x=x, d=d, y=y, w=w, cluster=labels("cluster"), stratum=labels("stratum"))
    return LoadedData(dataset, ghat, [name for name, _ in covariate_cols])
