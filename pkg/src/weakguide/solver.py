"""Limited-memory quasi-Newton minimizer and a finite-difference gradient check."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteOracle

# consecutive small-decrease iterations required before stopping on ObjDecrease
_STALL_PATIENCE = 5
_MAX_BACKTRACKS = 60
_BUNDLE_M = 0.1  # fraction of predicted decrease a serious step must achieve


class ConvergedBy(str, enum.Enum):
    GRAD_NORM = "GradNorm"
    OBJ_DECREASE = "ObjDecrease"
    MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class SolverSettings:
    max_iters: int = 2000
    grad_tol: float = 1e-6
    obj_tol: float = 1e-10
    ls_shrink: float = 0.5
    ls_c1: float = 1e-4
    memory: int = 10

    def __post_init__(self):
        if self.max_iters < 1 or self.memory < 1:
            raise ValueError("max_iters and memory must be positive")
        if not (self.grad_tol > 0 and self.obj_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.ls_shrink < 1 and 0 < self.ls_c1 < 1):
            raise ValueError("ls_shrink and ls_c1 must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class SolveReport:
    w_star: np.ndarray
    final_value: float
    iters: int
    converged_by: ConvergedBy
    grad_inf_norm: float


def _evaluate(oracle, w):
    value, grad = oracle(w)
    value = float(value)
    grad = np.asarray(grad, dtype=float)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NonFiniteOracle("objective oracle returned a non-finite value or gradient")
    return value, grad


def _two_loop(grad, history):
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = history[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _backtrack(oracle, w, value, grad, direction, settings, slope=None):
    if slope is None:
        slope = grad @ direction
    t = 1.0
    for _ in range(_MAX_BACKTRACKS):
        w_new = w + t * direction
        v_new, g_new = _evaluate(oracle, w_new)
        if v_new <= value + settings.ls_c1 * t * slope:
            return w_new, v_new, g_new
        # minimizer of the quadratic interpolant along the direction, kept
        # within [0.1, ls_shrink] times the rejected step
        curv = v_new - value - slope * t
        t_q = -slope * t * t / (2.0 * curv) if curv > 0 else 0.0
        t = min(max(t_q, 0.1 * t), settings.ls_shrink * t)
    return None


def simplex_qp(Q, c, tol=1e-10, max_iter=500, lam0=None):
    """Minimize 0.5 l'Ql + c'l over the probability simplex (Q symmetric PSD).

    Primal active-set method; the working set holds the coordinates fixed at
    zero. ``lam0`` is an optional feasible starting point. Small problems only.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    k = c.size
    norm = max(float(np.abs(Q.diagonal()).max()), float(np.abs(c).max()), 1e-300)
    Q = Q / norm
    Q.flat[::k + 1] += 1e-12
    c = c / norm
    if lam0 is not None and np.sum(np.maximum(lam0, 0.0)) > 0:
        lam = np.maximum(np.asarray(lam0, dtype=float), 0.0)
        lam /= lam.sum()
    else:
        lam = np.zeros(k)
        lam[int(np.argmin(0.5 * Q.diagonal() + c))] = 1.0
    F = np.flatnonzero(lam > 0)
    # after an unblocked step lam is the minimizer on the current face, and
    # re-solving would only return rounding noise
    on_face_min = False
    for _ in range(max_iter):
        grad = Q @ lam + c
        if not on_face_min:
            m = F.size
            K = np.ones((m + 1, m + 1))
            K[:m, :m] = Q[np.ix_(F, F)]
            K[m, m] = 0.0
            rhs = np.zeros(m + 1)
            rhs[:m] = -grad[F]
            try:
                p = np.linalg.solve(K, rhs)[:m]
            except np.linalg.LinAlgError:
                p = np.linalg.lstsq(K, rhs, rcond=None)[0][:m]
            on_face_min = np.abs(p).max() <= tol * max(1.0, lam.max())
        if on_face_min:
            # multiplier check for the coordinates held at zero
            level = grad[F].mean()
            mult = grad - level
            mult[F] = 0.0
            i = int(np.argmin(mult))
            if mult[i] >= -tol * max(1.0, abs(level)):
                break
            F = np.sort(np.append(F, i))
            on_face_min = False
            continue
        neg = p < 0
        step, block = 1.0, -1
        if neg.any():
            Fn = F[neg]
            ratios = -lam[Fn] / p[neg]
            r = int(np.argmin(ratios))
            if ratios[r] < 1.0:
                step, block = float(ratios[r]), int(Fn[r])
        lam[F] += step * p
        if block >= 0:
            lam[block] = 0.0
            F = F[F != block]
        else:
            on_face_min = True
    lam = np.maximum(lam, 0.0)
    return lam / lam.sum()


def _bundle(oracle, w, value, grad, settings, it, u):
    """Proximal bundle iterations from the center ``w``.

    Returns (w, value, grad, iterations used, ConvergedBy). Serious steps
    satisfy a sufficient-decrease test, so centers never get worse.
    """
    n = w.size
    cap = 5 * n
    G = grad[None, :].copy()
    alpha = np.zeros(1)
    u_min, u_max = 1e-8 * u, 1e8 * u
    scale = max(abs(value), 1.0)
    while it < settings.max_iters:
        it += 1
        lam = simplex_qp(G @ G.T / u, alpha)
        g_agg = lam @ G
        e_agg = float(lam @ alpha)
        predicted = -(g_agg @ g_agg) / u - e_agg
        if -predicted <= settings.obj_tol * scale:
            return w, value, grad, it, ConvergedBy.OBJ_DECREASE
        d = -g_agg / u
        w_try = w + d
        v_try, g_try = _evaluate(oracle, w_try)
        if v_try <= value + _BUNDLE_M * predicted:
            ratio = (value - v_try) / -predicted
            alpha = np.maximum(alpha + (v_try - value) - G @ d, 0.0)
            e_agg = max(e_agg + (v_try - value) - g_agg @ d, 0.0)
            w, value, grad = w_try, v_try, g_try
            scale = max(abs(value), 1.0)
            a_new = 0.0
            if ratio > 0.9:
                u = max(u * 0.5, u_min)
            gnorm = float(np.max(np.abs(grad)))
            if gnorm <= settings.grad_tol:
                return w, value, grad, it, ConvergedBy.GRAD_NORM
        else:
            a_new = max(value - v_try + g_try @ d, 0.0)
            if a_new > -predicted:
                u = min(u * 2.0, u_max)
        keep = np.arange(lam.size)
        if keep.size + 2 > cap:
            # drop inactive cuts with the largest linearization error first
            order = np.lexsort((-alpha, lam > 0))
            keep = np.sort(order[keep.size + 2 - cap:])
        G = np.vstack([G[keep], g_agg, g_try])
        alpha = np.concatenate([alpha[keep], [e_agg, a_new]])
    return w, value, grad, it, ConvergedBy.MAX_ITERS


def _composite_bundle(oracle, w, value, grad, settings, it, H, b):
    """Bundle iterations for F(w) = w'Hw - 2b'w + phi(w) with phi convex.

    The quadratic is kept exact in each subproblem and only phi is modeled
    by cutting planes, with a small proximal term for stability. Returns the
    same tuple as :func:`_bundle`.
    """
    n = w.size
    cap = 5 * n

    def split(v, g, x):
        quad = x @ H @ x - 2.0 * (b @ x)
        return v - quad, g - (2.0 * (H @ x) - 2.0 * b)

    phi, s0 = split(value, grad, w)
    S = s0[None, :].copy()
    e = np.array([phi - s0 @ w])
    lam = np.ones(1)
    u = 1e-3 * max(float(np.mean(np.diag(H))), 1e-12)
    u_min = 1e-6 * u
    scale = max(abs(value), 1.0)
    while it < settings.max_iters:
        it += 1
        M = 2.0 * H + u * np.eye(n)
        r = 2.0 * b + u * w
        MinvS = np.linalg.solve(M, S.T)
        Minvr = np.linalg.solve(M, r)
        lam = simplex_qp(S @ MinvS, -(S @ Minvr + e), lam0=lam)
        w_try = Minvr - MinvS @ lam
        model = w_try @ H @ w_try - 2.0 * (b @ w_try) + float(np.max(S @ w_try + e))
        predicted = value - model
        if predicted <= settings.obj_tol * scale:
            # the trial point is one more prox step; keep it when no worse
            v_try, g_try = _evaluate(oracle, w_try)
            if v_try <= value:
                w, value, grad = w_try, v_try, g_try
            return w, value, grad, it, ConvergedBy.OBJ_DECREASE
        v_try, g_try = _evaluate(oracle, w_try)
        phi_try, s_try = split(v_try, g_try, w_try)
        if v_try <= value - _BUNDLE_M * predicted:
            if value - v_try > 0.9 * predicted:
                u = max(0.5 * u, u_min)
            w, value, grad = w_try, v_try, g_try
            scale = max(abs(value), 1.0)
            if float(np.max(np.abs(grad))) <= settings.grad_tol:
                return w, value, grad, it, ConvergedBy.GRAD_NORM
        else:
            u *= 2.0
        keep = np.arange(lam.size)
        if keep.size + 1 > cap:
            # drop the inactive cut lying furthest below phi at the center
            gap = S @ w + e
            order = np.lexsort((gap, lam > 0))
            keep = np.sort(order[keep.size + 1 - cap:])
        S = np.vstack([S[keep], s_try])
        e = np.concatenate([e[keep], [phi_try - s_try @ w_try]])
        lam = np.append(lam[keep], 0.0)
    return w, value, grad, it, ConvergedBy.MAX_ITERS


def minimize(oracle, w0, settings: SolverSettings = SolverSettings(),
             quadratic=None) -> SolveReport:
    """Minimize a convex function given ``oracle(w) -> (value, gradient)``.

    L-BFGS directions with an Armijo backtracking line search; when the
    quasi-Newton direction is not a descent direction the step falls back to
    the negative (sub)gradient. If neither line search succeeds, or the
    quasi-Newton steps stall (``_STALL_PATIENCE`` consecutive relative
    decreases below ``obj_tol``, typical when crawling along a kink of a
    piecewise-linear term), the remaining budget goes to a proximal bundle
    method started from the current point. Accepted iterates never increase
    the objective.

    ``quadratic=(H, b)`` declares that the objective is w'Hw - 2b'w + phi(w)
    with phi convex and H symmetric PSD. The quasi-Newton phase is then
    skipped: a bundle method that keeps the quadratic exact and models only
    phi by cutting planes runs from ``w0``. Meant for piecewise-linear phi,
    where it terminates in a few dozen iterations.
    """
    w = np.array(w0, dtype=float)
    value, grad = _evaluate(oracle, w)
    history = deque(maxlen=settings.memory)
    stalls = 0
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    if gnorm <= settings.grad_tol:
        return SolveReport(w, value, 0, ConvergedBy.GRAD_NORM, gnorm)
    if quadratic is not None:
        H, b = (np.asarray(a, dtype=float) for a in quadratic)
        w, value, grad, it, how = _composite_bundle(oracle, w, value, grad, settings, 0, H, b)
        return SolveReport(w, value, it, how, float(np.max(np.abs(grad))))

    it = 0
    while it < settings.max_iters:
        it += 1
        step = None
        if history:
            direction = _two_loop(grad, history)
            if grad @ direction < 0:
                step = _backtrack(oracle, w, value, grad, direction, settings)
        if step is None:
            gn = np.linalg.norm(grad)
            step = _backtrack(oracle, w, value, grad, -grad / max(gn, 1.0), settings)
        if step is None:
            break

        w_new, v_new, g_new = step
        s = w_new - w
        y = g_new - grad
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            history.append((s, y, 1.0 / sy))

        decrease = value - v_new
        scale = max(abs(value), abs(v_new), 1.0)
        w, value, grad = w_new, v_new, g_new
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= settings.grad_tol:
            return SolveReport(w, value, it, ConvergedBy.GRAD_NORM, gnorm)
        stalls = stalls + 1 if decrease <= settings.obj_tol * scale else 0
        if stalls >= _STALL_PATIENCE:
            break
    else:
        return SolveReport(w, value, it, ConvergedBy.MAX_ITERS, gnorm)

    # prox weight: smallest curvature seen along accepted steps; null steps
    # raise it when the model overshoots
    if history:
        u = min(float(sy / (s @ s)) for s, _, sy_inv in history for sy in (1.0 / sy_inv,))
    else:
        u = 1.0
    w, value, grad, it, how = _bundle(oracle, w, value, grad, settings, it, u)
    return SolveReport(w, value, it, how, float(np.max(np.abs(grad))))


def check_gradient(oracle, w, step: float = 1e-6) -> float:
    """Worst coordinate-wise relative error between the oracle's gradient and
    central finite differences.

    The relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    w = np.array(w, dtype=float)
    _, grad = _evaluate(oracle, w)
    worst = 0.0
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = step
        fp, _ = _evaluate(oracle, w + e)
        fm, _ = _evaluate(oracle, w - e)
        numeric = (fp - fm) / (2.0 * step)
        denom = max(abs(grad[i]), abs(numeric), 1e-8)
        worst = max(worst, abs(grad[i] - numeric) / denom)
    return worst
