"""Negative log-likelihood terms for weak guidance and the combined objective.

Every loss is written in terms of predicted responses. The vectorized
``*_terms`` helpers return per-item values and partial derivatives and are
what :func:`objective_eval` uses; the scalar functions wrap them and return a
:class:`LossEval`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import (
    DEFAULT_RATE,
    DEFAULT_STABILIZER_EPS,
    Bound,
    Direction,
    GuidanceKind,
    GuidanceSet,
    Hyperparams,
    Neighbor,
    Relative,
    Similar,
    validate_guidance,
)
from .errors import BadInterval, BadThreshold, DimensionMismatch

_TINY = np.nextafter(0.0, 1.0)


class LossKind(str, enum.Enum):
    RELATIVE = "relative"
    BOUND = "bound"
    NEIGHBOR = "neighbor"
    SIMILAR = "similar"
    HINGE_RELATIVE = "hinge_relative"


@dataclass(frozen=True)
class LossEval:
    value: float
    grad: np.ndarray


def logistic_cdf(t):
    """Standard logistic CDF 1 / (1 + exp(-t)), overflow-free.

    Results on the negative branch are floored at the smallest positive
    double so the CDF never reports exactly zero.
    """
    t = np.asarray(t, dtype=float)
    e = np.exp(-np.abs(t))
    out = np.where(t >= 0, 1.0 / (1.0 + e), np.maximum(e / (1.0 + e), _TINY))
    return out if out.ndim else float(out)


def softplus(t):
    """log(1 + exp(t)) as max(t, 0) + log1p(exp(-|t|))."""
    t = np.asarray(t, dtype=float)
    out = np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))
    return out if out.ndim else float(out)


def log_logistic_cdf(t):
    """log F(t) = -softplus(-t)."""
    return -softplus(-np.asarray(t, dtype=float))


def log_cdf_difference(u, v, width=None):
    """log(F(u) - F(v)) for u > v without cancellation.

    Uses F(u) - F(v) = F(u) F(-v) (1 - exp(v - u)). ``width`` may be passed
    as the exact value of u - v when the caller knows it.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if width is None:
        width = u - v
    return log_logistic_cdf(u) + log_logistic_cdf(-v) + np.log(-np.expm1(-np.asarray(width, dtype=float)))


def _log_logistic_density(t):
    # log F'(t) = log F(t) + log F(-t)
    return log_logistic_cdf(t) + log_logistic_cdf(-t)


def _interval_terms(u, v, width, eps):
    """-log(F(u) - F(v) + eps) and its derivative with respect to a shift
    that moves both u and v down by the same amount."""
    # log F(t) = -(max(-t, 0) + a), log F(-t) = -(max(t, 0) + a), a = log1p(exp(-|t|))
    au = np.log1p(np.exp(-np.abs(u)))
    av = np.log1p(np.exp(-np.abs(v)))
    log_fu = -(np.maximum(-u, 0.0) + au)
    log_fmv = -(np.maximum(v, 0.0) + av)
    log_diff = log_fu + log_fmv + np.log(-np.expm1(-width))
    log_mass = np.logaddexp(log_diff, np.log(eps))
    # log F'(t) = -(|t| + 2a)
    slope = np.exp(-(np.abs(u) + 2.0 * au) - log_mass) - np.exp(-(np.abs(v) + 2.0 * av) - log_mass)
    return -log_mass, slope


def relative_terms(f_hi, f_lo):
    margin = np.asarray(f_hi, dtype=float) - np.asarray(f_lo, dtype=float)
    value = softplus(-margin)
    # d value / d margin = -F(-margin)
    dm = -logistic_cdf(-margin)
    return np.asarray(value), np.asarray(dm)


def bound_terms(f, a, b, eps=DEFAULT_STABILIZER_EPS):
    f = np.asarray(f, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return _interval_terms(b - f, a - f, b - a, eps)


def similar_terms(diff, s, eps=DEFAULT_STABILIZER_EPS):
    """Per-pair value and derivative with respect to diff = f_i - f_j.

    Computed from |diff| so that swapping the pair gives identical values.
    """
    diff = np.asarray(diff, dtype=float)
    ad = np.abs(diff)
    value, slope = _interval_terms(s - ad, -s - ad, 2.0 * s, eps)
    return value, np.sign(diff) * slope


def neighbor_terms(f_i, f_j, f_k, below, rate=DEFAULT_RATE):
    """Values and averaged subgradients for neighbor triples.

    ``below`` is a boolean array: True selects the penalty
    rate * max(f_k - f_j, f_k - f_i, 0), False its mirror
    rate * max(f_j - f_k, f_i - f_k, 0). Returns (value, grad) where grad has
    shape (n, 3) ordered (f_i, f_j, f_k).
    """
    f_i = np.asarray(f_i, dtype=float)
    f_j = np.asarray(f_j, dtype=float)
    f_k = np.asarray(f_k, dtype=float)
    below = np.asarray(below, dtype=bool)
    sign = np.where(below, 1.0, -1.0)
    t_j = sign * (f_k - f_j)
    t_i = sign * (f_k - f_i)
    top = np.maximum(np.maximum(t_j, t_i), 0.0)
    act_j = t_j == top
    act_i = t_i == top
    act_0 = top == 0.0
    count = act_j.astype(float) + act_i.astype(float) + act_0.astype(float)
    w_j = act_j / count
    w_i = act_i / count
    # d t_j = sign * (0, -1, 1); d t_i = sign * (-1, 0, 1)
    grad = np.stack([-w_i, -w_j, w_i + w_j], axis=-1) * (sign * rate)[..., None]
    return rate * top, grad


def hinge_terms(f_hi, f_lo, margin=1.0):
    m = np.asarray(f_hi, dtype=float) - np.asarray(f_lo, dtype=float)
    slack = margin - m
    value = np.maximum(slack, 0.0)
    dm = np.where(slack > 0, -1.0, 0.0)
    return value, dm


def relative_loss(f_hi: float, f_lo: float) -> LossEval:
    value, dm = relative_terms(f_hi, f_lo)
    return LossEval(float(value), np.array([dm, -dm], dtype=float))


def bound_loss(f: float, a: float, b: float, eps: float = DEFAULT_STABILIZER_EPS) -> LossEval:
    if not a < b:
        raise BadInterval(f"need a < b, got [{a}, {b}]")
    value, slope = bound_terms(f, a, b, eps)
    return LossEval(float(value), np.array([slope], dtype=float))


def neighbor_loss(f_i: float, f_j: float, f_k: float,
                  direction=Direction.BELOW, rate: float = DEFAULT_RATE) -> LossEval:
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    below = Direction(direction) is Direction.BELOW
    value, grad = neighbor_terms(f_i, f_j, f_k, below, rate)
    return LossEval(float(value), np.asarray(grad, dtype=float).reshape(3))


def similar_loss(f_i: float, f_j: float, s: float, eps: float = DEFAULT_STABILIZER_EPS) -> LossEval:
    if not s > 0:
        raise BadThreshold(f"similarity threshold must be positive, got {s}")
    value, dd = similar_terms(f_i - f_j, s, eps)
    return LossEval(float(value), np.array([dd, -dd], dtype=float))


def hinge_relative_loss(f_hi: float, f_lo: float, margin: float = 1.0) -> LossEval:
    if margin < 0:
        raise ValueError(f"margin must be non-negative, got {margin}")
    value, dm = hinge_terms(f_hi, f_lo, margin)
    return LossEval(float(value), np.array([dm, -dm], dtype=float))


_KIND_FOR_LOSS = {
    LossKind.RELATIVE: GuidanceKind.RELATIVE,
    LossKind.HINGE_RELATIVE: GuidanceKind.RELATIVE,
    LossKind.BOUND: GuidanceKind.BOUND,
    LossKind.NEIGHBOR: GuidanceKind.NEIGHBOR,
    LossKind.SIMILAR: GuidanceKind.SIMILAR,
}


_PAIRWISE = (LossKind.RELATIVE, LossKind.HINGE_RELATIVE, LossKind.SIMILAR)


@dataclass
class ObjectiveSpec:
    """Data and weights defining

        ||X_labeled w - y_labeled||^2 + lambda1 ||w||^2 + lambda2 * sum_g L(g)

    ``guidance.pool`` holds the guidance instances in the same (standardized)
    coordinates as ``X_labeled``. ``response_offset`` is subtracted from
    Bound endpoints, so intervals given in raw response units line up with
    predictions made against centered responses. ``kind`` selects the loss;
    it defaults to the guidance set's own kind.
    """

    X_labeled: np.ndarray
    y_labeled: np.ndarray
    guidance: Optional[GuidanceSet] = None
    hyper: Hyperparams = field(default_factory=Hyperparams)
    kind: Optional[Union[LossKind, str]] = None
    response_offset: float = 0.0
    margin: float = 1.0

    def __post_init__(self):
        self.X_labeled = np.asarray(self.X_labeled, dtype=float)
        self.y_labeled = np.asarray(self.y_labeled, dtype=float)
        if self.X_labeled.ndim != 2 or self.y_labeled.shape != (self.X_labeled.shape[0],):
            raise DimensionMismatch("X_labeled must be n x d and y_labeled length n")
        if self.kind is None and self.guidance is not None:
            self.kind = LossKind(self.guidance.kind.value)
        if self.kind is not None:
            self.kind = LossKind(self.kind)
        self._compile()

    @property
    def d(self) -> int:
        return self.X_labeled.shape[1]

    def _compile(self):
        gs = self.guidance
        self._active = gs is not None and len(gs) > 0 and self.kind is not None
        if not self._active:
            return
        if gs.pool.shape[1] != self.d:
            raise DimensionMismatch(
                f"guidance pool has {gs.pool.shape[1]} columns, labeled data has {self.d}")
        if _KIND_FOR_LOSS[self.kind] is not gs.kind:
            raise ValueError(f"loss {self.kind.value} cannot use {gs.kind.value} guidance")
        validate_guidance(gs)
        self._pool = gs.pool
        arrays = gs.item_arrays()
        self._idx = arrays["idx"]
        if gs.kind is GuidanceKind.BOUND:
            self._a = arrays["a"] - self.response_offset
            self._b = arrays["b"] - self.response_offset
        elif gs.kind is GuidanceKind.NEIGHBOR:
            self._below = arrays["below"]
        # guidance touches only a few pool rows; restrict the matvec to them
        used, inverse = arrays["used"], arrays["local"]
        self._used_rows = self._pool[used]
        self._local_idx = inverse
        # pairwise and single-instance losses depend on w through one row each
        self._item_rows = None
        if self.kind in _PAIRWISE:
            self._item_rows = self._used_rows[inverse[:, 0]] - self._used_rows[inverse[:, 1]]
        elif self.kind is LossKind.BOUND:
            self._item_rows = self._used_rows[inverse[:, 0]]

    def _row_terms(self, t):
        """Per-item values and derivatives with respect to ``_item_rows @ w``."""
        kind, gs = self.kind, self.guidance
        if kind is LossKind.RELATIVE:
            return relative_terms(t, 0.0)
        if kind is LossKind.HINGE_RELATIVE:
            return hinge_terms(t, 0.0, self.margin)
        if kind is LossKind.SIMILAR:
            return similar_terms(t, gs.s, gs.stabilizer_eps)
        value, slope = bound_terms(t, self._a, self._b, gs.stabilizer_eps)
        return value, slope

    def guidance_terms(self, f_used):
        """Per-item loss values and partials with respect to each used pool
        prediction (shape of ``_local_idx``)."""
        f = f_used[self._local_idx]
        gs = self.guidance
        kind = self.kind
        if kind is LossKind.RELATIVE:
            value, dm = relative_terms(f[:, 0], f[:, 1])
            partial = np.stack([dm, -dm], axis=1)
        elif kind is LossKind.HINGE_RELATIVE:
            value, dm = hinge_terms(f[:, 0], f[:, 1], self.margin)
            partial = np.stack([dm, -dm], axis=1)
        elif kind is LossKind.BOUND:
            value, slope = bound_terms(f[:, 0], self._a, self._b, gs.stabilizer_eps)
            partial = slope[:, None]
        elif kind is LossKind.NEIGHBOR:
            value, partial = neighbor_terms(f[:, 0], f[:, 1], f[:, 2], self._below, gs.rate)
        else:
            value, dd = similar_terms(f[:, 0] - f[:, 1], gs.s, gs.stabilizer_eps)
            partial = np.stack([dd, -dd], axis=1)
        return value, partial

    def quadratic_part(self):
        """(H, b) with ||Xw - y||^2 + lambda1 ||w||^2 = w'Hw - 2b'w + y'y."""
        X = self.X_labeled
        H = X.T @ X + self.hyper.lambda1 * np.eye(self.d)
        return H, X.T @ self.y_labeled

    def guidance_loss(self, w) -> float:
        if not self._active:
            return 0.0
        value, _ = self.guidance_terms(self._used_rows @ np.asarray(w, dtype=float))
        return float(np.sum(value))


def objective_eval(w, spec: ObjectiveSpec):
    """Objective value and gradient at ``w``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.d,):
        raise DimensionMismatch(f"w has shape {w.shape}, expected ({spec.d},)")
    h = spec.hyper
    r = spec.X_labeled @ w - spec.y_labeled
    value = r @ r + h.lambda1 * (w @ w)
    grad = 2.0 * (spec.X_labeled.T @ r) + 2.0 * h.lambda1 * w
    if spec._active and h.lambda2 != 0.0 and spec._item_rows is not None:
        terms, dt = spec._row_terms(spec._item_rows @ w)
        value += h.lambda2 * np.sum(terms)
        grad = grad + h.lambda2 * (spec._item_rows.T @ dt)
    elif spec._active and h.lambda2 != 0.0:
        f_used = spec._used_rows @ w
        terms, partial = spec.guidance_terms(f_used)
        value += h.lambda2 * np.sum(terms)
        df = np.bincount(spec._local_idx.ravel(), weights=partial.ravel(),
                         minlength=f_used.shape[0])
        grad = grad + h.lambda2 * (spec._used_rows.T @ df)
    return float(value), grad


def make_oracle(spec: ObjectiveSpec):
    return lambda w: objective_eval(w, spec)
