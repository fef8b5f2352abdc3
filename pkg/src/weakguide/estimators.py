"""Fit/predict for the mixed-guidance model and the baseline regressors.

All fits standardize covariates on the labeled rows and center responses on
the labeled mean; there is no separate intercept weight.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import (
    Dataset,
    GuidanceKind,
    GuidanceSet,
    Hyperparams,
    LinearModel,
    validate_dataset,
    validate_guidance,
)
from .data import fit_standardizer
from .errors import BadBandwidth, DimensionMismatch, SingularSystem
from .losses import LossKind, ObjectiveSpec, make_oracle, objective_eval
from .solver import SolverSettings, minimize

# reciprocal condition number below which a normal-equation system is refused
_RCOND = 1e-13


class Method(str, enum.Enum):
    RIDGE = "ridge"
    MIXED_GUIDANCE = "mixed"
    LAPLACIAN_RIDGE = "laplacian"
    HINGE_RELATIVE = "hinge"
    QUARTILE_PSEUDO_LABEL = "pseudo"


@dataclass
class FitSpec:
    dataset: Dataset
    method: Method = Method.RIDGE
    guidance: Optional[GuidanceSet] = None
    hyper: Hyperparams = field(default_factory=Hyperparams)
    solver: SolverSettings = field(default_factory=SolverSettings)
    unlabeled: Optional[np.ndarray] = None
    margin: float = 1.0

    def __post_init__(self):
        self.method = Method(self.method)
        needs_guidance = self.method in (Method.MIXED_GUIDANCE, Method.HINGE_RELATIVE)
        if needs_guidance != (self.guidance is not None):
            raise ValueError(f"method {self.method.value}: guidance must be "
                             f"{'present' if needs_guidance else 'absent'}")
        needs_unlabeled = self.method is Method.LAPLACIAN_RIDGE
        if needs_unlabeled != (self.unlabeled is not None):
            raise ValueError(f"method {self.method.value}: unlabeled matrix must be "
                             f"{'present' if needs_unlabeled else 'absent'}")


def _transform_for(X, standardize):
    if standardize:
        return fit_standardizer(X)
    d = X.shape[1]
    return np.zeros(d), np.ones(d)


def solve_normal_equations(A, b):
    """Solve A w = b, raising SingularSystem when A is numerically singular."""
    if not np.all(np.isfinite(A)):
        raise SingularSystem("system matrix has non-finite entries")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0 or s[-1] <= _RCOND * s[0]:
        raise SingularSystem(f"normal equations are singular (condition {s[0] / max(s[-1], 1e-300):.3g})")
    return np.linalg.solve(A, b)


def fit_ridge_closed_form(X, y, lambda1: float, standardize: bool = True) -> LinearModel:
    """Solve (X'X + lambda1 I) w = X'y on standardized X and centered y.

    With ``standardize=False`` neither step is applied.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    validate_dataset(Dataset(X, y))
    if lambda1 < 0:
        raise ValueError("lambda1 must be non-negative")
    center, scale = _transform_for(X, standardize)
    y_center = float(y.mean()) if standardize else 0.0
    Z = (X - center) / scale
    A = Z.T @ Z + lambda1 * np.eye(Z.shape[1])
    w = solve_normal_equations(A, Z.T @ (y - y_center))
    return LinearModel(w, center, scale, y_center)


def fit_ridge(ds: Dataset, hyper: Hyperparams) -> LinearModel:
    return fit_ridge_closed_form(ds.X, ds.y, hyper.lambda1)


def build_objective(spec: FitSpec, kind: Optional[LossKind] = None):
    """Standardized objective for ``spec`` and the transform it was built on.

    Returns (ObjectiveSpec, x_center, x_scale, y_center). The guidance pool is
    mapped through the labeled-set transform.
    """
    ds = spec.dataset
    validate_dataset(ds)
    center, scale = fit_standardizer(ds.X)
    y_center = float(ds.y.mean())
    gs = spec.guidance
    if gs is not None:
        validate_guidance(gs)
        if gs.pool.shape[1] != ds.d:
            raise DimensionMismatch("guidance pool and dataset have different column counts")
        gs = gs.with_pool((gs.pool - center) / scale)
    obj = ObjectiveSpec((ds.X - center) / scale, ds.y - y_center, gs, spec.hyper,
                        kind=kind, response_offset=y_center, margin=spec.margin)
    return obj, center, scale, y_center


# kinds whose guidance term is piecewise linear in w
_POLYHEDRAL = (LossKind.NEIGHBOR, LossKind.HINGE_RELATIVE)


def _fit_iterative(spec: FitSpec, kind: Optional[LossKind], w0=None) -> LinearModel:
    obj, center, scale, y_center = build_objective(spec, kind)
    w0 = np.zeros(obj.d) if w0 is None else np.asarray(w0, dtype=float)
    quad = obj.quadratic_part() if obj.kind in _POLYHEDRAL else None
    report = minimize(make_oracle(obj), w0, spec.solver, quadratic=quad)
    return LinearModel(report.w_star, center, scale, y_center)


def fit_mixed_guidance(spec: FitSpec, w0=None) -> LinearModel:
    """Minimize the ridge objective plus lambda2 times the guidance
    negative log-likelihood.

    Starts from ``w0`` (standardized coordinates), by default w = 0.
    """
    if spec.method is not Method.MIXED_GUIDANCE:
        raise ValueError("fit_mixed_guidance needs method=MixedGuidance")
    return _fit_iterative(spec, None, w0)


def fit_hinge_relative(spec: FitSpec, w0=None) -> LinearModel:
    """Ridge plus lambda2 * sum of max(0, margin - (f_hi - f_lo)) over pairs."""
    if spec.method is not Method.HINGE_RELATIVE:
        raise ValueError("fit_hinge_relative needs method=HingeRelative")
    if spec.guidance.kind is not GuidanceKind.RELATIVE:
        raise ValueError("hinge baseline needs Relative guidance")
    return _fit_iterative(spec, LossKind.HINGE_RELATIVE, w0)


def fit_quartile_pseudolabel(spec: FitSpec, pseudo) -> LinearModel:
    """Closed-form ridge on the labeled rows plus pseudo-labeled rows.

    ``pseudo`` is a sequence of (instance vector, label) pairs; each gets the
    same unit weight as a real label.
    """
    ds = spec.dataset
    X, y = ds.X, ds.y
    if len(pseudo):
        Xp = np.array([np.asarray(x, dtype=float) for x, _ in pseudo]).reshape(len(pseudo), -1)
        yp = np.array([float(v) for _, v in pseudo])
        X = np.vstack([X, Xp])
        y = np.concatenate([y, yp])
    return fit_ridge_closed_form(X, y, spec.hyper.lambda1)


def build_laplacian(X_all, sigma: float) -> np.ndarray:
    """Graph Laplacian D - W of the fully connected Gaussian-kernel graph."""
    if not (np.isfinite(sigma) and sigma > 0):
        raise BadBandwidth(f"sigma must be positive, got {sigma}")
    X_all = np.asarray(X_all, dtype=float)
    sq = cdist(X_all, X_all, "sqeuclidean")
    W = np.exp(-sq / (2.0 * sigma * sigma))
    np.fill_diagonal(W, 0.0)
    return np.diag(W.sum(axis=1)) - W


def laplacian_objective(w, Z_l, y_l, Z_all, L, hyper: Hyperparams) -> float:
    r = Z_l @ w - y_l
    f = Z_all @ w
    return float(r @ r + hyper.lambda1 * (w @ w) + hyper.lambda_lap * (f @ L @ f))


def laplacian_system(spec: FitSpec):
    """Standardized pieces of the Laplacian ridge problem.

    Returns (Z_labeled, y_centered, Z_all, L, x_center, x_scale, y_center),
    with Z_all stacking labeled rows over unlabeled rows.
    """
    ds = spec.dataset
    validate_dataset(ds)
    U = np.asarray(spec.unlabeled, dtype=float).reshape(-1, ds.d)
    center, scale = fit_standardizer(ds.X)
    y_center = float(ds.y.mean())
    Z_l = (ds.X - center) / scale
    Z_all = np.vstack([Z_l, (U - center) / scale])
    L = build_laplacian(Z_all, spec.hyper.sigma)
    return Z_l, ds.y - y_center, Z_all, L, center, scale, y_center


def fit_laplacian_ridge(spec: FitSpec) -> LinearModel:
    """Solve (Z_l'Z_l + lambda1 I + lambda_lap Z_all' L Z_all) w = Z_l' y."""
    Z_l, yc, Z_all, L, center, scale, y_center = laplacian_system(spec)
    h = spec.hyper
    A = Z_l.T @ Z_l + h.lambda1 * np.eye(Z_l.shape[1])
    if h.lambda_lap != 0.0:
        A = A + h.lambda_lap * (Z_all.T @ L @ Z_all)
    w = solve_normal_equations(A, Z_l.T @ yc)
    return LinearModel(w, center, scale, y_center)


def predict(model: LinearModel, X) -> np.ndarray:
    return model.transform(X) @ model.w + model.y_center


def fit(spec: FitSpec, pseudo=None) -> LinearModel:
    """Dispatch on ``spec.method``."""
    m = spec.method
    if m is Method.RIDGE:
        return fit_ridge(spec.dataset, spec.hyper)
    if m is Method.MIXED_GUIDANCE:
        return fit_mixed_guidance(spec)
    if m is Method.HINGE_RELATIVE:
        return fit_hinge_relative(spec)
    if m is Method.LAPLACIAN_RIDGE:
        return fit_laplacian_ridge(spec)
    return fit_quartile_pseudolabel(spec, pseudo or [])


def guidance_objective_value(model: LinearModel, spec: FitSpec, kind=None) -> float:
    """Objective value of ``model`` under the standardized objective of ``spec``."""
    obj, *_ = build_objective(spec, kind)
    return objective_eval(model.w, obj)[0]
