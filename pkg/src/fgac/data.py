"""CSV ingestion, preprocessing and random oversampling."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .relations import Table

log = logging.getLogger(__name__)

MISSING = ("?", "")


class DataError(ValueError):
    pass


@dataclass
class Attribute:
    name: str
    kind: str  # "numeric" or "nominal"
    categories: Optional[tuple] = None


@dataclass
class Dataset:
    """Instances with typed attributes and class ids assigned by first appearance."""

    name: str
    attributes: list
    frame: pd.DataFrame
    target: np.ndarray
    classes: tuple
    dropped: int = 0
    provenance: str = ""

    def __len__(self):
        return len(self.target)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.target, minlength=len(self.classes))


def builtin_dataset(name: str) -> Path:
    """Path of a bundled CSV fixture (``iris``, ``wisconsin``, ``heart``, ...)."""
    path = resources.files("fgac") / "datasets" / f"{name}.csv"
    if not path.is_file():
        raise DataError(f"no bundled dataset named {name!r}")
    return Path(str(path))


def _resolve(path) -> Path:
    p = Path(path)
    if p.exists() or p.suffix:
        return p
    return builtin_dataset(str(path))


def load_csv(path, target: Optional[str] = None, nominal: Sequence[str] = (), name: Optional[str] = None) -> Dataset:
    """Read a CSV with a header row.

    ``target`` defaults to the last column.  Columns whose non-missing values
    all parse as numbers are numeric unless listed in ``nominal``.  ``?`` and
    empty cells are missing; rows containing them are dropped and counted.
    """
    p = _resolve(path)
    try:
        raw = pd.read_csv(p, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {p}: {exc}") from exc
    raw.columns = [c.strip() for c in raw.columns]
    if raw.empty:
        raise DataError(f"{p} has no data rows")
    target = raw.columns[-1] if target is None else target
    if target not in raw.columns:
        raise DataError(f"target column {target!r} not found; columns are {list(raw.columns)}")
    for col in nominal:
        if col not in raw.columns:
            raise DataError(f"nominal column {col!r} not found")
    raw = raw.apply(lambda s: s.str.strip())
    missing = raw.isin(MISSING).any(axis=1)
    dropped = int(missing.sum())
    if dropped:
        log.warning("%s: dropped %d row(s) with missing values", p.name, dropped)
    raw = raw.loc[~missing].reset_index(drop=True)
    if raw.empty:
        raise DataError(f"{p} has no complete rows")

    codes, uniques = pd.factorize(raw[target], sort=False)
    if len(uniques) < 2:
        raise DataError(f"target column {target!r} is constant")
    attributes = []
    frame = {}
    for col in raw.columns:
        if col == target:
            continue
        values = pd.to_numeric(raw[col], errors="coerce")
        if col not in nominal and not values.isna().any():
            attributes.append(Attribute(col, "numeric"))
            frame[col] = values.astype(float)
        else:
            cats = tuple(pd.unique(raw[col]))
            attributes.append(Attribute(col, "nominal", cats))
            frame[col] = raw[col]
    if not attributes:
        raise DataError("no attribute columns besides the target")
    return Dataset(name or p.stem, attributes, pd.DataFrame(frame), codes.astype(np.int64),
                   tuple(str(u) for u in uniques), dropped, str(p))


@dataclass
class Preprocessor:
    """Frozen scaling statistics from a fit split.

    Numeric attributes are min-max scaled with the fit-split range (held-out
    values are not clamped); constant ones are dropped.  Nominal attributes
    become integer category codes (``-1`` for unseen categories) and count
    one column per category towards ``|Q|``.
    """

    numeric: list
    mins: np.ndarray
    ranges: np.ndarray
    nominal: list
    categories: list
    dropped: list = field(default_factory=list)

    @property
    def q_count(self) -> int:
        return len(self.numeric) + sum(len(c) for c in self.categories)

    def transform(self, frame: pd.DataFrame) -> Table:
        missing = [c for c in self.numeric + self.nominal if c not in frame.columns]
        if missing:
            raise DataError(f"columns missing from the data: {missing}")
        num = np.empty((len(frame), len(self.numeric)))
        for j, c in enumerate(self.numeric):
            col = pd.to_numeric(frame[c], errors="coerce").to_numpy(float)
            if np.isnan(col).any():
                raise DataError(f"non-numeric value in numeric column {c!r}")
            num[:, j] = (col - self.mins[j]) / self.ranges[j]
        nom = np.empty((len(frame), len(self.nominal)), dtype=np.int64)
        for j, c in enumerate(self.nominal):
            lookup = {v: i for i, v in enumerate(self.categories[j])}
            nom[:, j] = [lookup.get(str(v), -1) for v in frame[c]]
        return Table(num, nom)

    def to_dict(self) -> dict:
        return {"numeric": list(self.numeric), "mins": self.mins.tolist(), "ranges": self.ranges.tolist(),
                "nominal": list(self.nominal), "categories": [list(c) for c in self.categories],
                "dropped": list(self.dropped)}

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        return cls(list(d["numeric"]), np.asarray(d["mins"], float), np.asarray(d["ranges"], float),
                   list(d["nominal"]), [tuple(c) for c in d["categories"]], list(d.get("dropped", [])))


def preprocess(dataset: Dataset, fit_index=None) -> Preprocessor:
    """Fit scaling statistics on the rows ``fit_index`` (all rows by default)."""
    frame = dataset.frame if fit_index is None else dataset.frame.iloc[np.asarray(fit_index)]
    if frame.empty:
        raise DataError("the fit split is empty")
    numeric, mins, ranges, dropped = [], [], [], []
    nominal, categories = [], []
    for att in dataset.attributes:
        if att.kind == "numeric":
            col = frame[att.name].to_numpy(float)
            lo, hi = float(col.min()), float(col.max())
            if hi - lo > 0:
                numeric.append(att.name)
                mins.append(lo)
                ranges.append(hi - lo)
            else:
                dropped.append(att.name)
        else:
            nominal.append(att.name)
            categories.append(tuple(str(c) for c in att.categories))
    if dropped:
        log.warning("dropping constant attribute(s) %s", dropped)
    return Preprocessor(numeric, np.array(mins), np.array(ranges), nominal, categories, dropped)


def oversample(class_labels, rng) -> np.ndarray:
    """Row indices after random oversampling of minority classes.

    The original rows come first in their order, followed by duplicates drawn
    with replacement so every class reaches the majority count.
    """
    y = np.asarray(class_labels)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise DataError("oversampling needs at least two classes")
    rng = np.random.default_rng(rng)
    top = counts.max()
    extra = [rng.choice(np.flatnonzero(y == c), top - n, replace=True)
             for c, n in zip(classes, counts) if n < top]
    return np.concatenate([np.arange(len(y))] + extra).astype(np.int64)
