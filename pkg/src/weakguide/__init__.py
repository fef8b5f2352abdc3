"""Linear regression from labeled data plus weak guidance.

Weak guidance items (pairwise orderings, interval bounds, neighbor triples,
similar pairs) enter the fit through their negative log-likelihoods, added
to a ridge objective and minimized with a deterministic convex solver.
"""

from .core import (
    Bound,
    Dataset,
    Direction,
    GuidanceKind,
    GuidanceSet,
    Hyperparams,
    LinearModel,
    Neighbor,
    Relative,
    Similar,
    response_range,
    validate_dataset,
    validate_guidance,
)
from .data import Split, fit_standardizer, gen_synthetic, load_csv, save_csv, select_top_correlated, split
from .estimators import (
    FitSpec,
    Method,
    fit,
    fit_hinge_relative,
    fit_laplacian_ridge,
    fit_mixed_guidance,
    fit_quartile_pseudolabel,
    fit_ridge,
    fit_ridge_closed_form,
    predict,
)
from .guidance import (
    QuartileGrid,
    gen_bound,
    gen_neighbor,
    gen_relative,
    gen_similar,
    quartile_grid,
    quartile_pseudolabels,
)
from .harness import ExperimentConfig, ResultRow, emit_results, run_experiment
from .losses import (
    LossKind,
    ObjectiveSpec,
    bound_loss,
    hinge_relative_loss,
    make_oracle,
    neighbor_loss,
    objective_eval,
    relative_loss,
    similar_loss,
)
from .solver import ConvergedBy, SolverSettings, SolveReport, check_gradient, minimize
from .tuning import TuneSpec, hyper_grid, random_cv_tune, s_grid

__version__ = "0.1.0"
