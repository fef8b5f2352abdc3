"""Domain types shared across the package."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    BadInterval,
    BadThreshold,
    DimensionMismatch,
    DuplicateIndexWithinItem,
    Empty,
    IndexOutOfRange,
    KindMismatch,
    MissingThreshold,
    NonFiniteValue,
)

DEFAULT_STABILIZER_EPS = 1e-10
DEFAULT_RATE = 1.0


def _frozen_array(values, ndim):
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Covariate matrix ``X`` (n x d) with responses ``y`` (length n)."""

    X: np.ndarray
    y: np.ndarray
    feature_names: Optional[tuple] = None
    target_name: Optional[str] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", _frozen_array(self.y, 1))
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.target_name)


def validate_dataset(ds: Dataset) -> None:
    """Raise if ``ds`` breaks a Dataset invariant; return None otherwise."""
    X, y = ds.X, ds.y
    if X.ndim != 2 or y.ndim != 1:
        raise DimensionMismatch("X must be 2-d and y 1-d")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but y has length {y.shape[0]}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise Empty(f"dataset must have n >= 1 and d >= 1, got shape {X.shape}")
    if ds.feature_names is not None and len(ds.feature_names) != X.shape[1]:
        raise DimensionMismatch("feature_names length does not match column count")
    if not np.all(np.isfinite(X)):
        raise NonFiniteValue("X contains NaN or infinite entries")
    if not np.all(np.isfinite(y)):
        raise NonFiniteValue("y contains NaN or infinite entries")


def response_range(y) -> float:
    """max(y) - min(y)."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise Empty("response vector is empty")
    return float(np.max(y) - np.min(y))


class GuidanceKind(str, enum.Enum):
    RELATIVE = "relative"
    BOUND = "bound"
    NEIGHBOR = "neighbor"
    SIMILAR = "similar"


class Direction(str, enum.Enum):
    """Side of the anchor/neighbor pair on which the outlier k falls.

    ``BELOW`` corresponds to the neighbor penalty exactly as printed (it
    penalizes f_k rising above f_i or f_j); ``ABOVE`` is its mirror image.
    """

    BELOW = "below"
    ABOVE = "above"


@dataclass(frozen=True)
class Relative:
    """f(x_hi) > f(x_lo)."""

    hi: int
    lo: int
    kind = GuidanceKind.RELATIVE

    @property
    def indices(self):
        return (self.hi, self.lo)


@dataclass(frozen=True)
class Bound:
    """f(x_idx) lies in [a, b]."""

    idx: int
    a: float
    b: float
    kind = GuidanceKind.BOUND

    @property
    def indices(self):
        return (self.idx,)


@dataclass(frozen=True)
class Neighbor:
    """x_i's response is closer to x_j's than to x_k's."""

    i: int
    j: int
    k: int
    direction: Direction = Direction.BELOW
    kind = GuidanceKind.NEIGHBOR

    @property
    def indices(self):
        return (self.i, self.j, self.k)


@dataclass(frozen=True)
class Similar:
    """|f(x_i) - f(x_j)| is at most the set-wide threshold s."""

    i: int
    j: int
    kind = GuidanceKind.SIMILAR

    @property
    def indices(self):
        return (self.i, self.j)


GuidanceItem = Union[Relative, Bound, Neighbor, Similar]

_ITEM_TYPES = {
    GuidanceKind.RELATIVE: Relative,
    GuidanceKind.BOUND: Bound,
    GuidanceKind.NEIGHBOR: Neighbor,
    GuidanceKind.SIMILAR: Similar,
}


@dataclass(frozen=True)
class GuidanceSet:
    """A homogeneous collection of weak guidance over a pool of instances.

    Item indices refer to rows of ``pool``. ``s`` is the Similar threshold in
    response units; ``stabilizer_eps`` is the constant added inside the
    difference-of-CDF log terms.
    """

    items: tuple
    kind: GuidanceKind
    pool: np.ndarray
    s: Optional[float] = None
    rate: float = DEFAULT_RATE
    stabilizer_eps: float = DEFAULT_STABILIZER_EPS

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "kind", GuidanceKind(self.kind))
        pool = np.array(self.pool, dtype=float)
        if pool.ndim == 1:
            pool = pool.reshape(-1, 1)
        pool.setflags(write=False)
        object.__setattr__(self, "pool", pool)
        # derived from items only; shared by sets made with with_pool
        object.__setattr__(self, "_memo", {})

    def __len__(self):
        return len(self.items)

    def with_pool(self, pool) -> "GuidanceSet":
        out = GuidanceSet(self.items, self.kind, pool, self.s, self.rate, self.stabilizer_eps)
        object.__setattr__(out, "_memo", self._memo)
        return out

    def item_arrays(self) -> dict:
        """Item fields as integer/float arrays (computed once per item tuple).

        Keys: ``idx`` (n x arity), ``used`` (sorted distinct pool rows),
        ``local`` (idx mapped into ``used``), plus ``a``/``b`` for Bound and
        ``below`` for Neighbor.
        """
        memo = self._memo
        if "arrays" not in memo:
            items, kind = self.items, self.kind
            arity = {GuidanceKind.BOUND: 1, GuidanceKind.NEIGHBOR: 3}.get(kind, 2)
            idx = np.array([item.indices for item in items], dtype=int).reshape(len(items), arity)
            used, inverse = np.unique(idx, return_inverse=True)
            out = {"idx": idx, "used": used, "local": inverse.reshape(idx.shape)}
            if kind is GuidanceKind.BOUND:
                out["a"] = np.array([it.a for it in items], dtype=float)
                out["b"] = np.array([it.b for it in items], dtype=float)
            elif kind is GuidanceKind.NEIGHBOR:
                out["below"] = np.array([Direction(it.direction) is Direction.BELOW for it in items],
                                        dtype=bool)
            memo["arrays"] = out
        return memo["arrays"]

    def to_json(self) -> str:
        return items_to_json(self.items)


def validate_guidance(gs: GuidanceSet, pool_size: Optional[int] = None) -> None:
    """Raise if ``gs`` breaks a GuidanceSet/GuidanceItem invariant."""
    if pool_size is None:
        pool_size = gs.pool.shape[0]
    key = ("valid", pool_size)
    if gs._memo.get(key):
        return
    if gs.kind is GuidanceKind.SIMILAR:
        if gs.s is None:
            raise MissingThreshold("Similar guidance requires a threshold s")
        if not (np.isfinite(gs.s) and gs.s > 0):
            raise BadThreshold(f"Similar threshold must be positive and finite, got {gs.s}")
    if not (np.isfinite(gs.rate) and gs.rate > 0):
        raise ValueError(f"rate must be positive, got {gs.rate}")
    if not (np.isfinite(gs.stabilizer_eps) and gs.stabilizer_eps > 0):
        raise ValueError(f"stabilizer_eps must be positive, got {gs.stabilizer_eps}")
    expected = _ITEM_TYPES[gs.kind]
    for n, item in enumerate(gs.items):
        if not isinstance(item, expected):
            raise KindMismatch(f"item {n} is {type(item).__name__}, set kind is {gs.kind.value}")
        idx = item.indices
        for i in idx:
            if not (0 <= int(i) < pool_size):
                raise IndexOutOfRange(f"item {n}: index {i} outside pool of size {pool_size}")
        if len(set(idx)) != len(idx):
            raise DuplicateIndexWithinItem(f"item {n}: repeated index in {idx}")
        if isinstance(item, Bound):
            if not (np.isfinite(item.a) and np.isfinite(item.b)):
                raise BadInterval(f"item {n}: interval endpoints must be finite")
            if not item.a < item.b:
                raise BadInterval(f"item {n}: need a < b, got [{item.a}, {item.b}]")
    gs._memo[key] = True


def item_to_dict(item: GuidanceItem) -> dict:
    if isinstance(item, Relative):
        return {"type": "relative", "hi": int(item.hi), "lo": int(item.lo)}
    if isinstance(item, Bound):
        return {"type": "bound", "idx": int(item.idx), "a": float(item.a), "b": float(item.b)}
    if isinstance(item, Neighbor):
        return {"type": "neighbor", "i": int(item.i), "j": int(item.j), "k": int(item.k),
                "direction": Direction(item.direction).value}
    if isinstance(item, Similar):
        return {"type": "similar", "i": int(item.i), "j": int(item.j)}
    raise TypeError(f"not a guidance item: {item!r}")


def item_from_dict(obj: dict) -> GuidanceItem:
    tag = obj["type"]
    if tag == "relative":
        return Relative(int(obj["hi"]), int(obj["lo"]))
    if tag == "bound":
        return Bound(int(obj["idx"]), float(obj["a"]), float(obj["b"]))
    if tag == "neighbor":
        return Neighbor(int(obj["i"]), int(obj["j"]), int(obj["k"]), Direction(obj["direction"]))
    if tag == "similar":
        return Similar(int(obj["i"]), int(obj["j"]))
    raise ValueError(f"unknown guidance item type {tag!r}")


def items_to_json(items: Sequence[GuidanceItem]) -> str:
    return json.dumps([item_to_dict(it) for it in items])


def items_from_json(text: str) -> list:
    return [item_from_dict(obj) for obj in json.loads(text)]


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda_lap: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda_lap"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite non-negative number, got {v}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class LinearModel:
    """Linear predictor on standardized covariates with a response offset.

    ``predict(x) = w . ((x - x_center) / x_scale) + y_center``
    """

    w: np.ndarray
    x_center: np.ndarray
    x_scale: np.ndarray
    y_center: float = 0.0

    def __post_init__(self):
        for name in ("w", "x_center", "x_scale"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), 1))
        if not (self.w.shape == self.x_center.shape == self.x_scale.shape):
            raise DimensionMismatch("w, x_center and x_scale must have equal length")
        if np.any(self.x_scale <= 0):
            raise ValueError("x_scale entries must be strictly positive")
        object.__setattr__(self, "y_center", float(self.y_center))

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.d:
            raise DimensionMismatch(f"model expects {self.d} columns, got {X.shape[1]}")
        return (X - self.x_center) / self.x_scale

    @property
    def coef(self) -> np.ndarray:
        """Weights expressed on the raw covariate scale."""
        return self.w / self.x_scale

    @property
    def intercept(self) -> float:
        return float(self.y_center - self.coef @ self.x_center)

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "x_center": self.x_center.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_center": self.y_center,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        obj = json.loads(text)
        return cls(obj["w"], obj["x_center"], obj["x_scale"], obj["y_center"])


def identity_model(w) -> LinearModel:
    w = np.asarray(w, dtype=float)
    return LinearModel(w, np.zeros_like(w), np.ones_like(w), 0.0)
