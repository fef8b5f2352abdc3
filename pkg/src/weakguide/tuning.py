"""Grid search with repeated random train/validation splits."""

from __future__ import annotations

import csv
import inspect
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import Dataset, Hyperparams
from .errors import InsufficientData, IoError, SingularSystem

S_MULTIPLIERS = (0.05, 0.1, 0.2, 0.3)


def hyper_grid() -> list:
    """{0} together with 10^k for k = -8..8, ascending."""
    return [0.0] + [10.0 ** k for k in range(-8, 9)]


def s_grid(response_range: float, multipliers: Sequence[float] = S_MULTIPLIERS) -> list:
    if response_range < 0:
        raise ValueError("response range must be non-negative")
    return sorted(m * response_range for m in multipliers)


@dataclass(frozen=True)
class TuneSpec:
    lambda_grid: tuple = field(default_factory=lambda: tuple(hyper_grid()))
    s_multipliers: tuple = S_MULTIPLIERS
    cv_repeats: int = 10
    val_fraction: float = 0.2
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        object.__setattr__(self, "s_multipliers", tuple(float(v) for v in self.s_multipliers))
        if not self.lambda_grid or not self.s_multipliers:
            raise ValueError("grids must be nonempty")
        if any(v < 0 or not math.isfinite(v) for v in self.lambda_grid):
            raise ValueError("lambda grid values must be finite and non-negative")
        if self.cv_repeats < 1:
            raise ValueError("cv_repeats must be at least 1")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "TuneSpec":
        return cls(**d)

    def to_dict(self) -> dict:
        return {"lambda_grid": list(self.lambda_grid), "s_multipliers": list(self.s_multipliers),
                "cv_repeats": self.cv_repeats, "val_fraction": self.val_fraction,
                "rng_seed": self.rng_seed}


@dataclass(frozen=True)
class Candidate:
    hyper: Hyperparams
    s: Optional[float] = None

    def sort_key(self):
        # grid points differing only in lambda2 are adjacent, lambda2 ascending
        h = self.hyper
        return (-1.0 if self.s is None else self.s, h.sigma, h.lambda_lap, h.lambda1, h.lambda2)

    def warm_group(self):
        h = self.hyper
        return (self.s, h.sigma, h.lambda_lap, h.lambda1)

    def preference(self):
        """Ordering among equal scores: stronger regularization, then smaller s."""
        h = self.hyper
        return (-h.lambda1, -h.lambda2, -h.lambda_lap, -1.0 if self.s is None else self.s, h.sigma)


def grid_candidates(spec: TuneSpec, guided: bool = False, s_values=None) -> list:
    """lambda1 over the grid; with ``guided`` also lambda2 (full product), and
    each s in ``s_values`` when given."""
    l2s = spec.lambda_grid if guided else (0.0,)
    ss = [None] if s_values is None else list(s_values)
    return [Candidate(Hyperparams(l1, l2), s) for s in ss for l1 in spec.lambda_grid for l2 in l2s]


def laplacian_candidates(spec: TuneSpec, sigmas) -> list:
    return [Candidate(Hyperparams(l1, 0.0, lap, sig))
            for sig in sigmas for l1 in spec.lambda_grid for lap in spec.lambda_grid]


@dataclass
class TuneResult:
    hyper: Hyperparams
    s: Optional[float]
    mean_rmse: float
    # (candidate index, lambda1, lambda2, lambda_lap, sigma, s, repeat, rmse)
    table: list
    candidates: list

    def mean_scores(self) -> np.ndarray:
        if not self.table:
            return np.full(len(self.candidates), np.nan)
        reps = max(r[6] for r in self.table) + 1
        scores = np.full((len(self.candidates), reps), np.nan)
        for row in self.table:
            scores[row[0], row[6]] = row[7]
        return scores.mean(axis=1)

    def write_table(self, path) -> None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["candidate", "lambda1", "lambda2", "lambda_lap", "sigma", "s", "repeat", "rmse"])
                for row in self.table:
                    w.writerow([row[0], *(repr(v) if v is not None else "" for v in row[1:6]),
                                row[6], repr(row[7])])
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc


def cv_splits(n: int, spec: TuneSpec):
    """(train, validation) index arrays for every repeat."""
    n_val = max(1, int(round(spec.val_fraction * n)))
    if n - n_val < 2:
        raise InsufficientData(f"{n} labeled rows leave fewer than 2 for training")
    rng = np.random.default_rng(spec.rng_seed)
    out = []
    for _ in range(spec.cv_repeats):
        perm = rng.permutation(n)
        out.append((np.sort(perm[n_val:]), np.sort(perm[:n_val])))
    return out


def _accepts_w0(fn):
    try:
        return "w0" in inspect.signature(fn).parameters
    except (TypeError, ValueError):
        return False


def random_cv_tune(fit_fn: Callable, labeled: Dataset, guidance_factory: Optional[Callable] = None,
                   spec: TuneSpec = TuneSpec(), candidates=None, s_values=None) -> TuneResult:
    """Pick the grid point with the lowest mean validation RMSE.

    ``fit_fn(train, hyper, guidance[, w0])`` returns a fitted model usable
    with :func:`weakguide.estimators.predict`. ``guidance_factory(repeat, s)``
    supplies the guidance for one repeat (``s`` is None unless ``s_values``
    is given). Without explicit ``candidates`` the grid is lambda1 alone, or
    lambda1 x lambda2 (x s) when a factory is present.

    Consecutive grid points that differ only in lambda2 are fitted with the
    previous solution as starting point when ``fit_fn`` accepts ``w0``.
    A fit that raises SingularSystem scores +inf.
    """
    from .estimators import predict

    if candidates is None:
        candidates = grid_candidates(spec, guided=guidance_factory is not None, s_values=s_values)
    if not candidates:
        raise ValueError("no grid points to evaluate")
    if len(candidates) == 1:
        only = candidates[0]
        return TuneResult(only.hyper, only.s, math.nan, [], [only])
    order = sorted(range(len(candidates)), key=lambda i: candidates[i].sort_key())
    splits = cv_splits(labeled.n, spec)
    warm = _accepts_w0(fit_fn)

    scores = np.full((len(candidates), len(splits)), np.inf)
    for rep, (tr, va) in enumerate(splits):
        train, val = labeled.subset(tr), labeled.subset(va)
        cache = {}
        prev_group, w_prev = None, None
        for ci in order:
            cand = candidates[ci]
            gs = None
            if guidance_factory is not None:
                if cand.s not in cache:
                    cache[cand.s] = guidance_factory(rep, cand.s)
                gs = cache[cand.s]
            group = cand.warm_group()
            kwargs = {}
            if warm and group == prev_group and w_prev is not None:
                kwargs["w0"] = w_prev
            try:
                model = fit_fn(train, cand.hyper, gs, **kwargs)
            except SingularSystem:
                prev_group, w_prev = group, None
                continue
            prev_group, w_prev = group, model.w
            resid = predict(model, val.X) - val.y
            scores[ci, rep] = math.sqrt(float(np.mean(resid * resid)))

    means = scores.mean(axis=1)
    finite = np.flatnonzero(np.isfinite(means))
    if finite.size == 0:
        raise InsufficientData("no grid point produced a finite validation score")
    best = min(finite, key=lambda i: (means[i], candidates[i].preference()))
    table = [(ci, c.hyper.lambda1, c.hyper.lambda2, c.hyper.lambda_lap, c.hyper.sigma, c.s,
              rep, float(scores[ci, rep]))
             for ci, c in enumerate(candidates) for rep in range(len(splits))]
    return TuneResult(candidates[best].hyper, candidates[best].s, float(means[best]), table,
                      list(candidates))
