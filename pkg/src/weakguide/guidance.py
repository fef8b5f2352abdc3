"""Sampling weak guidance from oracle responses of a guidance pool."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Bound, Direction, Neighbor, Relative, Similar, response_range
from .errors import (
    BadThreshold,
    Empty,
    InsufficientDistinctResponses,
    RetryBudgetExhausted,
)

RETRY_FACTOR = 100
QUARTILE_PROBS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_S_FRACTION = 0.1


@dataclass(frozen=True)
class QuartileGrid:
    """(min, Q1, median, Q3, max) of a response sample."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != 5 or any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"quartile grid must be 5 non-decreasing values, got {vals}")
        object.__setattr__(self, "values", vals)

    def cell(self, y: float):
        """Adjacent grid pair bracketing ``y``; a value on a grid point goes to
        the cell below it (the first cell for the minimum)."""
        g = np.asarray(self.values)
        m = int(np.searchsorted(g, y, side="left"))
        m = min(max(m, 1), 4)
        return g[m - 1], g[m]

    def closest(self, y: float) -> float:
        """Grid value nearest to ``y``; ties go to the lower value."""
        g = np.asarray(self.values)
        return float(g[int(np.argmin(np.abs(g - y)))])


def quartile_grid(y_pool) -> QuartileGrid:
    y = np.asarray(y_pool, dtype=float)
    if y.size < 2:
        raise Empty("quartile grid needs at least 2 responses")
    return QuartileGrid(tuple(np.quantile(y, QUARTILE_PROBS, method="linear")))


def _budget(m):
    return RETRY_FACTOR * max(m, 1)


def gen_relative(y_pool, m: int, rng_seed=0) -> list:
    """``m`` uniformly drawn pairs, each oriented so that y[hi] > y[lo].
    Pairs with equal responses are redrawn."""
    y = np.asarray(y_pool, dtype=float)
    if y.size < 2:
        raise Empty("relative guidance needs a pool of at least 2")
    rng = np.random.default_rng(rng_seed)
    items = []
    for _ in range(_budget(m)):
        if len(items) == m:
            break
        i, j = rng.choice(y.size, size=2, replace=False)
        if y[i] == y[j]:
            continue
        items.append(Relative(int(i), int(j)) if y[i] > y[j] else Relative(int(j), int(i)))
    if len(items) < m:
        raise InsufficientDistinctResponses(
            f"only {len(items)} of {m} pairs with distinct responses found")
    return items


def gen_bound(y_pool, m: int, grid: QuartileGrid, rng_seed=0) -> list:
    """``m`` uniformly drawn instances, each bounded by its bracketing grid cell.

    A collapsed cell is widened by 1e-6 times the pool's response range
    (or by 1e-6 when the pool is constant) on each side.
    """
    y = np.asarray(y_pool, dtype=float)
    if y.size == 0:
        raise Empty("bound guidance needs a nonempty pool")
    rng = np.random.default_rng(rng_seed)
    pad = 1e-6 * response_range(y) or 1e-6
    items = []
    for idx in rng.integers(0, y.size, size=m):
        a, b = grid.cell(y[idx])
        if not a < b:
            a, b = a - pad, b + pad
        items.append(Bound(int(idx), float(a), float(b)))
    return items


def quartile_pseudolabels(y_pool, items, grid: QuartileGrid) -> list:
    """(pool index, closest grid value) for each Bound item's instance."""
    y = np.asarray(y_pool, dtype=float)
    return [(it.idx, grid.closest(y[it.idx])) for it in items]


def gen_neighbor(y_pool, m: int, rng_seed=0) -> list:
    """``m`` triples (i, j, k): i is the first draw, j the closer of the other
    two by response, k the farther. Distance ties are redrawn; the direction
    records whether y_k lies above or below both y_i and y_j."""
    y = np.asarray(y_pool, dtype=float)
    if y.size < 3:
        raise Empty("neighbor guidance needs a pool of at least 3")
    rng = np.random.default_rng(rng_seed)
    items = []
    for _ in range(_budget(m)):
        if len(items) == m:
            break
        i, p, q = (int(v) for v in rng.choice(y.size, size=3, replace=False))
        dp, dq = abs(y[p] - y[i]), abs(y[q] - y[i])
        if dp == dq:
            continue
        j, k = (p, q) if dp < dq else (q, p)
        lo, hi = min(y[i], y[j]), max(y[i], y[j])
        if lo <= y[k] <= hi:
            continue
        direction = Direction.ABOVE if y[k] > hi else Direction.BELOW
        items.append(Neighbor(i, j, k, direction))
    if len(items) < m:
        raise RetryBudgetExhausted(f"only {len(items)} of {m} neighbor triples found")
    return items


def default_similar_threshold(y_pool) -> float:
    return DEFAULT_S_FRACTION * response_range(y_pool)


def gen_similar(y_pool, m: int, s: float, rng_seed=0) -> list:
    """``m`` uniformly drawn pairs with |y_i - y_j| <= s, by rejection."""
    if not s > 0:
        raise BadThreshold(f"similarity threshold must be positive, got {s}")
    y = np.asarray(y_pool, dtype=float)
    if y.size < 2:
        raise Empty("similar guidance needs a pool of at least 2")
    rng = np.random.default_rng(rng_seed)
    items = []
    for _ in range(_budget(m)):
        if len(items) == m:
            break
        i, j = rng.choice(y.size, size=2, replace=False)
        if abs(y[i] - y[j]) <= s:
            items.append(Similar(int(i), int(j)))
    if len(items) < m:
        raise RetryBudgetExhausted(f"only {len(items)} of {m} similar pairs found within s={s}")
    return items
