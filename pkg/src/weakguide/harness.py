"""Learning-curve experiments: configuration, trial loop, result files."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset, GuidanceKind, GuidanceSet, LinearModel, response_range
from .data import fit_standardizer, gen_synthetic, load_csv, select_top_correlated, split
from .errors import ConfigError, ExperimentError, IoError, WeakGuideError
from .estimators import (
    FitSpec,
    Method,
    fit,
    fit_hinge_relative,
    fit_mixed_guidance,
    fit_ridge,
    laplacian_system,
    predict,
    solve_normal_equations,
)
from .guidance import (
    gen_bound,
    gen_neighbor,
    gen_relative,
    gen_similar,
    quartile_grid,
    quartile_pseudolabels,
)
from .tuning import TuneSpec, laplacian_candidates, random_cv_tune, s_grid

# purpose tags mixed into per-trial seeds
_SPLIT, _GUIDE, _TUNE, _CV_GUIDE = 0, 1, 2, 3
_KIND_CODE = {GuidanceKind.RELATIVE: 0, GuidanceKind.BOUND: 1,
              GuidanceKind.NEIGHBOR: 2, GuidanceKind.SIMILAR: 3}
# Laplacian bandwidths, as multiples of the median pairwise distance
SIGMA_MULTIPLIERS = (0.5, 1.0, 2.0)


def derive_seed(master: int, *counters: int) -> int:
    """Deterministic 32-bit seed from the master seed and integer counters."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFF, *(int(c) for c in counters)])
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class MethodSpec:
    """A method name, optionally with the guidance kind it consumes.

    Written ``ridge``, ``mixed:bound``, ``hinge``, ``pseudo``, ``laplacian``.
    """

    method: Method
    kind: Optional[GuidanceKind] = None

    @classmethod
    def parse(cls, text: str, default_kind=None) -> "MethodSpec":
        name, _, kind = str(text).partition(":")
        try:
            method = Method(name.strip().lower())
        except ValueError:
            raise ConfigError(f"unknown method {text!r}") from None
        kind = kind.strip().lower() or default_kind
        if method is Method.MIXED_GUIDANCE:
            if kind is None:
                raise ConfigError(f"method {text!r} needs a guidance kind")
            kind = GuidanceKind(kind)
        elif method is Method.HINGE_RELATIVE:
            kind = GuidanceKind.RELATIVE
        elif method is Method.QUARTILE_PSEUDO_LABEL:
            kind = GuidanceKind.BOUND
        else:
            kind = None
        return cls(method, kind)

    @property
    def label(self) -> str:
        if self.method is Method.MIXED_GUIDANCE:
            return f"{self.method.value}:{self.kind.value}"
        return self.method.value


@dataclass
class ExperimentConfig:
    dataset_source: dict = field(default_factory=lambda: {"synthetic": {"n": 500, "d": 50, "noise": 1.0}})
    feature_select_k: Optional[int] = None
    methods: list = field(default_factory=lambda: ["ridge", "mixed"])
    guidance_kind: Optional[str] = "relative"
    n_labeled_sweep: list = field(default_factory=lambda: [10, 20, 30, 40])
    n_guidance_sweep: list = field(default_factory=lambda: [20, 50])
    n_test: int = 100
    trials: int = 30
    seed: int = 0
    tune: TuneSpec = field(default_factory=TuneSpec)
    out_dir: str = "results"

    def __post_init__(self):
        if isinstance(self.tune, dict):
            self.tune = TuneSpec.from_dict(self.tune)
        if self.guidance_kind is not None:
            try:
                self.guidance_kind = GuidanceKind(self.guidance_kind).value
            except ValueError:
                raise ConfigError(f"unknown guidance kind {self.guidance_kind!r}") from None
        if not self.n_labeled_sweep or not self.n_guidance_sweep or not self.methods:
            raise ConfigError("methods and sweeps must be nonempty")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.n_test < 1:
            raise ConfigError("n_test must be at least 1")
        if len(self.dataset_source) != 1 or next(iter(self.dataset_source)) not in ("synthetic", "csv"):
            raise ConfigError("dataset_source must be {'synthetic': {...}} or {'csv': {...}}")
        self.method_specs()

    def method_specs(self) -> list:
        return [MethodSpec.parse(m, self.guidance_kind) for m in self.methods]

    @property
    def dataset_name(self) -> str:
        kind, args = next(iter(self.dataset_source.items()))
        return "synthetic" if kind == "synthetic" else Path(args["path"]).stem

    def load_dataset(self) -> Dataset:
        kind, args = next(iter(self.dataset_source.items()))
        if kind == "synthetic":
            ds = gen_synthetic(int(args.get("n", 500)), int(args.get("d", 50)),
                               float(args.get("noise", 1.0)), int(args.get("seed", self.seed)))
        else:
            ds = load_csv(args["path"], args["target"])
        if self.feature_select_k is not None:
            ds = select_top_correlated(ds, self.feature_select_k)
        return ds

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read {path}: {exc}") from exc
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tune"] = self.tune.to_dict()
        return d


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    method: str
    guidance_kind: str
    n_labeled: int
    n_guidance: int
    trial: int
    rmse: float
    mae: float
    lambda1: float
    lambda2: float
    s: Optional[float]
    lambda_lap: float = 0.0
    sigma: Optional[float] = None


RESULT_FIELDS = [f.name for f in fields(ResultRow)]


def _generate(kind: GuidanceKind, y_pool, m, seed, s=None):
    if kind is GuidanceKind.RELATIVE:
        return gen_relative(y_pool, m, seed)
    if kind is GuidanceKind.BOUND:
        return gen_bound(y_pool, m, quartile_grid(y_pool), seed)
    if kind is GuidanceKind.NEIGHBOR:
        return gen_neighbor(y_pool, m, seed)
    return gen_similar(y_pool, m, s, seed)


def _errors(model, test: Dataset):
    r = predict(model, test.X) - test.y
    return math.sqrt(float(np.mean(r * r))), float(np.mean(np.abs(r)))


def _mixed_fit(train, hyper, gs, w0=None):
    # lambda2 = 0 is exactly the ridge objective
    if hyper.lambda2 == 0.0:
        return fit_ridge(train, hyper)
    return fit_mixed_guidance(FitSpec(train, Method.MIXED_GUIDANCE, gs, hyper), w0=w0)


def _hinge_fit(train, hyper, gs, w0=None):
    if hyper.lambda2 == 0.0:
        return fit_ridge(train, hyper)
    return fit_hinge_relative(FitSpec(train, Method.HINGE_RELATIVE, gs, hyper), w0=w0)


def _ridge_fit(train, hyper, gs):
    return fit_ridge(train, hyper)


def _median_distance(X):
    from scipy.spatial.distance import pdist

    dist = pdist(X)
    med = float(np.median(dist)) if dist.size else 0.0
    return med if med > 0 else 1.0


class _Trial:
    """Everything shared by the methods of one (trial, n_labeled, n_guidance) cell."""

    def __init__(self, cfg: ExperimentConfig, ds: Dataset, trial: int, n_labeled: int, n_guidance: int):
        self.cfg = cfg
        self.trial, self.n_labeled, self.n_guidance = trial, n_labeled, n_guidance
        self.sp = split(ds, n_labeled, cfg.n_test, derive_seed(cfg.seed, _SPLIT, trial, n_labeled))
        self.y_pool = self.sp.pool.y
        self.tune = TuneSpec(cfg.tune.lambda_grid, cfg.tune.s_multipliers, cfg.tune.cv_repeats,
                             cfg.tune.val_fraction, derive_seed(cfg.seed, _TUNE, trial, n_labeled))

    def _seed(self, purpose, kind, *extra):
        return derive_seed(self.cfg.seed, purpose, self.trial, self.n_labeled, self.n_guidance,
                           _KIND_CODE[kind], *extra)

    def guidance(self, kind, s=None, rep=None) -> GuidanceSet:
        """The cell's guidance set, or the one drawn for CV repeat ``rep``."""
        if rep is None:
            seed = self._seed(_GUIDE, kind)
        else:
            seed = self._seed(_CV_GUIDE, kind, rep)
        items = _generate(kind, self.y_pool, self.n_guidance, seed, s)
        return GuidanceSet(items, kind, self.sp.pool.X, s=s)

    def s_values(self):
        return s_grid(response_range(self.y_pool), self.tune.s_multipliers)

    def run(self, ms: MethodSpec) -> ResultRow:
        labeled, test = self.sp.labeled, self.sp.test
        lap, sigma = 0.0, None
        m = ms.method
        if m is Method.RIDGE:
            res = random_cv_tune(_ridge_fit, labeled, None, self.tune)
            model = fit_ridge(labeled, res.hyper)
        elif m in (Method.MIXED_GUIDANCE, Method.HINGE_RELATIVE):
            kind = ms.kind
            s_vals = self.s_values() if kind is GuidanceKind.SIMILAR else None
            fit_fn = _mixed_fit if m is Method.MIXED_GUIDANCE else _hinge_fit
            res = random_cv_tune(fit_fn, labeled, lambda rep, s: self.guidance(kind, s, rep),
                                 self.tune, s_values=s_vals)
            model = fit_fn(labeled, res.hyper, self.guidance(kind, res.s))
        elif m is Method.QUARTILE_PSEUDO_LABEL:
            gs = self.guidance(GuidanceKind.BOUND)
            pseudo = [(self.sp.pool.X[i], v)
                      for i, v in quartile_pseudolabels(self.y_pool, gs.items, quartile_grid(self.y_pool))]

            def fit_fn(train, hyper, _gs):
                return fit(FitSpec(train, Method.QUARTILE_PSEUDO_LABEL, hyper=hyper), pseudo)

            res = random_cv_tune(fit_fn, labeled, None, self.tune)
            model = fit_fn(labeled, res.hyper, None)
        else:
            res, model = self._laplacian(labeled)
            lap, sigma = res.hyper.lambda_lap, res.hyper.sigma
        rmse, mae = _errors(model, test)
        kind = ms.kind.value if ms.kind is not None else ""
        return ResultRow(self.cfg.dataset_name, ms.label, kind, self.n_labeled, self.n_guidance,
                         self.trial, rmse, mae, res.hyper.lambda1, res.hyper.lambda2, res.s, lap, sigma)

    def _laplacian(self, labeled):
        U = self.sp.pool.X
        cache = {}

        def fit_fn(train, hyper, _gs):
            # the graph term depends only on the training rows and sigma
            key = (hashlib.sha1(train.X.tobytes()).hexdigest(), hyper.sigma)
            if key not in cache:
                spec = FitSpec(train, Method.LAPLACIAN_RIDGE, hyper=hyper, unlabeled=U)
                Z_l, yc, Z_all, L, c, sc, ym = laplacian_system(spec)
                cache[key] = (Z_l.T @ Z_l, Z_all.T @ L @ Z_all, Z_l.T @ yc, c, sc, ym)
            G, Lap, b, c, sc, ym = cache[key]
            A = G + hyper.lambda1 * np.eye(G.shape[0])
            if hyper.lambda_lap != 0.0:
                A = A + hyper.lambda_lap * Lap
            return LinearModel(solve_normal_equations(A, b), c, sc, ym)

        c, sc = fit_standardizer(labeled.X)
        base = _median_distance((np.vstack([labeled.X, U]) - c) / sc)
        sigmas = [m * base for m in SIGMA_MULTIPLIERS]
        res = random_cv_tune(fit_fn, labeled, None, self.tune,
                             candidates=laplacian_candidates(self.tune, sigmas))
        return res, fit_fn(labeled, res.hyper, None)


def run_experiment(cfg: ExperimentConfig, progress=None) -> list:
    """All result rows of ``cfg``, in canonical order.

    Methods within a cell share its split and guidance; trial seeds are
    derived from ``cfg.seed`` and the cell counters, so any cell can be
    reproduced alone.
    """
    try:
        ds = cfg.load_dataset()
    except WeakGuideError as exc:
        raise ExperimentError(f"loading dataset: {exc}") from exc
    specs = cfg.method_specs()
    rows = []
    for n_labeled in cfg.n_labeled_sweep:
        for trial in range(cfg.trials):
            ridge_rows = {}
            for n_guidance in cfg.n_guidance_sweep:
                try:
                    cell = _Trial(cfg, ds, trial, n_labeled, n_guidance)
                except WeakGuideError as exc:
                    raise ExperimentError(f"trial {trial}, n_labeled {n_labeled}: {exc}") from exc
                for ms in specs:
                    try:
                        if ms.kind is None and ms.label in ridge_rows:
                            # guidance-free methods do not depend on n_guidance
                            row = ridge_rows[ms.label]
                            row = ResultRow(**{**asdict(row), "n_guidance": n_guidance})
                        else:
                            row = cell.run(ms)
                            if ms.kind is None:
                                ridge_rows[ms.label] = row
                    except WeakGuideError as exc:
                        raise ExperimentError(
                            f"trial {trial}, method {ms.label}, n_labeled {n_labeled}, "
                            f"n_guidance {n_guidance}: {exc}") from exc
                    rows.append(row)
                    if progress is not None:
                        progress(row)
    return sort_rows(rows)


def sort_rows(rows) -> list:
    return sorted(rows, key=lambda r: (r.method, r.n_labeled, r.n_guidance, r.trial))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summarize(rows) -> list:
    """Mean and standard error (sample sd / sqrt(count)) per
    (method, n_labeled, n_guidance) cell."""
    cells = {}
    for r in rows:
        cells.setdefault((r.method, r.guidance_kind, r.n_labeled, r.n_guidance), []).append(r)
    out = []
    for (method, kind, nl, ng), rs in sorted(cells.items()):
        entry = {"method": method, "guidance_kind": kind, "n_labeled": nl, "n_guidance": ng,
                 "trials": len(rs)}
        for metric in ("rmse", "mae"):
            v = np.array([getattr(r, metric) for r in rs])
            entry[f"{metric}_mean"] = float(v.mean())
            entry[f"{metric}_stderr"] = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else None
        out.append(entry)
    return out


def write_results_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in sort_rows(rows):
            w.writerow([_fmt(getattr(r, f)) for f in RESULT_FIELDS])


def read_results_csv(path) -> list:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(ResultRow(
                rec["dataset"], rec["method"], rec["guidance_kind"], int(rec["n_labeled"]),
                int(rec["n_guidance"]), int(rec["trial"]), float(rec["rmse"]), float(rec["mae"]),
                float(rec["lambda1"]), float(rec["lambda2"]),
                float(rec["s"]) if rec["s"] else None, float(rec["lambda_lap"]),
                float(rec["sigma"]) if rec["sigma"] else None))
    return out


def emit_results(rows, out_dir) -> dict:
    """Write results.csv, summary.json and curves.csv; returns their paths."""
    if not rows:
        raise ValueError("no result rows to write")
    out = Path(out_dir)
    paths = {"results": out / "results.csv", "summary": out / "summary.json",
             "curves": out / "curves.csv"}
    summary = summarize(rows)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(rows, paths["results"])
        paths["summary"].write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        cols = ["method", "guidance_kind", "n_labeled", "n_guidance", "trials",
                "rmse_mean", "rmse_stderr", "mae_mean", "mae_stderr"]
        with open(paths["curves"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for entry in summary:
                w.writerow([_fmt(entry[c]) for c in cols])
    except OSError as exc:
        raise IoError(f"cannot write results to {out}: {exc}") from exc
    return paths
