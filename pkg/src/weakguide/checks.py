"""Numerical property suites behind the ``check`` subcommand.

The acceptance tests call them with their stated tolerances.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import GuidanceSet, Hyperparams
from .guidance import gen_bound, gen_neighbor, gen_relative, gen_similar, quartile_grid
from .losses import LossKind, ObjectiveSpec, log_cdf_difference, make_oracle
from .solver import check_gradient

ALL_KINDS = (LossKind.RELATIVE, LossKind.BOUND, LossKind.NEIGHBOR, LossKind.SIMILAR,
             LossKind.HINGE_RELATIVE)


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst {self.worst:.3e} (tol {self.tolerance:.0e}, {self.seconds:.1f}s)"


def random_objective(kind: LossKind, rng, d=10, n_items=20, n_labeled=30, n_pool=60,
                     lambda1=0.5, lambda2=1.0) -> ObjectiveSpec:
    """A random standardized-scale objective with ``n_items`` guidance items."""
    kind = LossKind(kind)
    X = rng.standard_normal((n_labeled, d))
    w_true = rng.standard_normal(d)
    y = X @ w_true + rng.standard_normal(n_labeled)
    pool = rng.standard_normal((n_pool, d))
    y_pool = pool @ w_true + rng.standard_normal(n_pool)
    seed = int(rng.integers(2**31))
    s = None
    if kind in (LossKind.RELATIVE, LossKind.HINGE_RELATIVE):
        items, gk = gen_relative(y_pool, n_items, seed), "relative"
    elif kind is LossKind.BOUND:
        items, gk = gen_bound(y_pool, n_items, quartile_grid(y_pool), seed), "bound"
    elif kind is LossKind.NEIGHBOR:
        items, gk = gen_neighbor(y_pool, n_items, seed), "neighbor"
    else:
        s = 0.2 * float(np.ptp(y_pool))
        items, gk = gen_similar(y_pool, n_items, s, seed), "similar"
    gs = GuidanceSet(items, gk, pool, s=s)
    return ObjectiveSpec(X, y, gs, Hyperparams(lambda1, lambda2), kind=kind)


def _kink_distance(obj: ObjectiveSpec, w) -> float:
    """Smallest gap between competing pieces of a piecewise-linear term."""
    f = obj._used_rows @ w
    loc = obj._local_idx
    if obj.kind is LossKind.HINGE_RELATIVE:
        return float(np.min(np.abs(obj.margin - (f[loc[:, 0]] - f[loc[:, 1]]))))
    if obj.kind is LossKind.NEIGHBOR:
        fi, fj, fk = f[loc[:, 0]], f[loc[:, 1]], f[loc[:, 2]]
        sign = np.where(obj._below, 1.0, -1.0)
        t = np.stack([sign * (fk - fj), sign * (fk - fi), np.zeros_like(fi)], axis=1)
        t.sort(axis=1)
        return float(np.min(t[:, 2] - t[:, 1]))
    return np.inf


def gradient_suite(seed=0, points=100, d=10, n_items=20, step=1e-5, tol=1e-5) -> list:
    """Worst finite-difference gradient error over random differentiable points.

    The step is 1e-5 rather than 1e-6: objective values here reach the
    hundreds, and at 1e-6 rounding in the differences alone can exceed 1e-5
    relative on small gradient components.
    """
    out = []
    for kind in ALL_KINDS:
        start = time.perf_counter()
        rng = np.random.default_rng([seed, list(ALL_KINDS).index(kind)])
        obj = random_objective(kind, rng, d=d, n_items=n_items)
        oracle = make_oracle(obj)
        worst, done = 0.0, 0
        while done < points:
            w = rng.standard_normal(d)
            # stay clear of kinks by much more than the difference step
            if _kink_distance(obj, w) < 1e3 * step * (1.0 + np.abs(obj._used_rows).sum(axis=1).max()):
                continue
            worst = max(worst, check_gradient(oracle, w, step))
            done += 1
        out.append(CheckResult(f"gradient[{kind.value}]", worst, tol, time.perf_counter() - start))
    return out


def convexity_suite(seed=0, tests=1000, d=10, n_items=20, tol=1e-8) -> list:
    """Chord tests f(t a + (1-t) b) <= t f(a) + (1-t) f(b) + tol; reports
    the largest excess f(mid) - chord."""
    out = []
    for kind in ALL_KINDS:
        start = time.perf_counter()
        rng = np.random.default_rng([seed, 100 + list(ALL_KINDS).index(kind)])
        obj = random_objective(kind, rng, d=d, n_items=n_items)
        oracle = make_oracle(obj)
        worst = -np.inf
        for _ in range(tests):
            # chords of mixed length, from nearly coincident to far apart
            a = rng.standard_normal(d) * 10.0 ** rng.uniform(-2.0, 1.0)
            b = a + rng.standard_normal(d) * 10.0 ** rng.uniform(-3.0, 1.0)
            t = rng.uniform()
            chord = t * oracle(a)[0] + (1 - t) * oracle(b)[0]
            mid = oracle(t * a + (1 - t) * b)[0]
            worst = max(worst, mid - chord)
        out.append(CheckResult(f"convexity[{kind.value}]", float(worst), tol, time.perf_counter() - start))
    return out


def logconcavity_suite(seed=0, intervals=100, h=0.1, tol=1e-6) -> CheckResult:
    """Largest second central difference of t -> log(F(b+t) - F(a+t)) over
    the grid t = -20, -20 + h, ..., 20."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    t = np.linspace(-20.0, 20.0, int(round(40.0 / h)) + 1)
    worst = -np.inf
    for _ in range(intervals):
        a = rng.uniform(-10.0, 10.0)
        width = 10.0 ** rng.uniform(-3.0, 1.0)
        b = a + width

        def g(x):
            return log_cdf_difference(b + x, a + x, width)

        second = g(t + h) - 2.0 * g(t) + g(t - h)
        worst = max(worst, float(np.max(second)))
    return CheckResult("log-concavity", worst, tol, time.perf_counter() - start)


def run_all(seed=0) -> list:
    return [*gradient_suite(seed), *convexity_suite(seed), logconcavity_suite(seed)]

