"""Synthetic data, CSV ingestion, standardization, feature selection, splits.

Random draws use numpy's PCG64 ``default_rng(seed)``; Gaussian variates come
from ``Generator.standard_normal`` (ziggurat transform).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dataset, validate_dataset
from .errors import BadK, Empty, InsufficientRows, IoError, MissingTarget, ParseError


@dataclass(frozen=True)
class Split:
    labeled: Dataset
    pool: Dataset
    test: Dataset
    labeled_idx: np.ndarray
    pool_idx: np.ndarray
    test_idx: np.ndarray


def gen_synthetic(n: int = 500, d: int = 50, noise_sd: float = 1.0, rng_seed=0,
                  return_weights: bool = False):
    """Draw w_true ~ N(0, I_d), x_i ~ N(0, I_d), y_i = w_true . x_i + N(0, noise_sd^2)."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    rng = np.random.default_rng(rng_seed)
    w_true = rng.standard_normal(d)
    X = rng.standard_normal((n, d))
    y = X @ w_true + noise_sd * rng.standard_normal(n)
    ds = Dataset(X, y, tuple(f"x{i}" for i in range(d)), "y")
    if return_weights:
        return ds, w_true
    return ds


def load_csv(path, target) -> Dataset:
    """Read a header-first, comma-separated numeric table.

    ``target`` is a column name or a 0-based column index. Remaining columns
    become covariates in file order. Quoted fields are rejected.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if '"' in text:
        raise ParseError(f"{path}: quoted fields are not supported")
    rows = list(csv.reader(text.splitlines()))
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    if isinstance(target, (int, np.integer)) and not isinstance(target, bool):
        if not 0 <= target < len(header):
            raise MissingTarget(f"target index {target} outside {len(header)} columns")
        t = int(target)
    else:
        if target not in header:
            raise MissingTarget(f"target column {target!r} not in header {header}")
        t = header.index(target)

    values = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} fields, header has {len(header)}",
                             row=r)
        for c, cell in enumerate(row):
            try:
                values[r - 1, c] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: row {r} (line {r + 1}), column {header[c]!r}: "
                    f"cannot parse {cell!r} as a number",
                    row=r, column=header[c]) from None
    if values.shape[0] == 0:
        raise Empty(f"{path}: no data rows")
    keep = [c for c in range(len(header)) if c != t]
    ds = Dataset(values[:, keep], values[:, t], tuple(header[c] for c in keep), header[t])
    validate_dataset(ds)
    return ds


def save_csv(ds: Dataset, path) -> None:
    """Write ``ds`` with the target as last column; floats use repr so that
    :func:`load_csv` recovers them exactly."""
    names = list(ds.feature_names or (f"x{i}" for i in range(ds.d)))
    target = ds.target_name or "y"
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(names + [target]) + "\n")
            for xrow, yv in zip(ds.X, ds.y):
                fh.write(",".join(repr(float(v)) for v in (*xrow, yv)) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def fit_standardizer(X_train):
    """Column means and population standard deviations.

    Constant columns get scale 1 and are centered on their own value, so
    they transform to exact zeros.
    """
    X = np.asarray(X_train, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise Empty("standardizer needs at least 2 rows")
    centers = X.mean(axis=0)
    scales = X.std(axis=0)
    constant = np.ptp(X, axis=0) == 0
    centers[constant] = X[0, constant]
    scales[constant | (scales == 0)] = 1.0
    return centers, scales


def _abs_correlations(X, y):
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt(np.sum(Xc * Xc, axis=0))
    sy = math.sqrt(float(yc @ yc))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(Xc.T @ yc) / (sx * sy)
    r[(sx == 0) | ~np.isfinite(r)] = -1.0  # zero variance ranks last
    return r


def select_top_correlated(ds: Dataset, k: int) -> Dataset:
    """Keep the ``k`` columns most correlated (in absolute value) with y,
    in their original order. Ties go to the lower column index."""
    if not 1 <= k <= ds.d:
        raise BadK(f"k must lie in [1, {ds.d}], got {k}")
    r = _abs_correlations(ds.X, ds.y)
    order = sorted(range(ds.d), key=lambda c: (-r[c], c))
    keep = sorted(order[:k])
    names = None if ds.feature_names is None else tuple(ds.feature_names[c] for c in keep)
    return Dataset(ds.X[:, keep], ds.y, names, ds.target_name)


def split(ds: Dataset, n_labeled: int, n_test: int, rng_seed=0) -> Split:
    """Uniform split: test rows first, then labeled rows, rest is the pool."""
    if n_test < 1 or n_labeled < 0:
        raise InsufficientRows("need n_test >= 1 and n_labeled >= 0")
    if n_labeled + n_test > ds.n:
        raise InsufficientRows(
            f"n_labeled + n_test = {n_labeled + n_test} exceeds {ds.n} rows")
    perm = np.random.default_rng(rng_seed).permutation(ds.n)
    test_idx = perm[:n_test]
    labeled_idx = perm[n_test:n_test + n_labeled]
    pool_idx = perm[n_test + n_labeled:]
    return Split(ds.subset(labeled_idx), ds.subset(pool_idx), ds.subset(test_idx),
                 labeled_idx, pool_idx, test_idx)
