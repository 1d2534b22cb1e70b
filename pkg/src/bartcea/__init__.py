"""Bayesian additive regression trees for cost-effectiveness analysis.

Univariate and probit BART, a bivariate correlated-error variant (suBART)
for joint cost and health outcomes, g-computation of treatment effects,
net-benefit and acceptability summaries, and a small simulation harness.
"""

__version__ = "0.1.0"

from .bart import BartConfig, BartPosterior, estimate_ps, fit_bart, fit_probit_bart
from .baselines import LinearFit, fit_ols, fit_sur
from .cea import (
    AteDraws,
    CeacCurve,
    CeaSummary,
    build_counterfactual_design,
    compute_ate_draws,
    compute_ceac,
    compute_inb,
    lambda_grid,
    summarize,
)
from .data import ColumnKind, DataError, Dataset, DesignMatrix, Schema, encode, load_csv
from .subart import SubartConfig, SubartPosterior, fit_subart
from .tree import RegressionTree, TreeEnsemble, predict_ensemble, propose_move, traverse

__all__ = [
    "AteDraws", "BartConfig", "BartPosterior", "CeaSummary", "CeacCurve", "ColumnKind",
    "DataError", "Dataset", "DesignMatrix", "LinearFit", "RegressionTree", "Schema",
    "SubartConfig", "SubartPosterior", "TreeEnsemble", "build_counterfactual_design",
    "compute_ate_draws", "compute_ceac", "compute_inb", "encode", "estimate_ps", "fit_bart",
    "fit_ols", "fit_probit_bart", "fit_subart", "fit_sur", "lambda_grid", "load_csv",
    "predict_ensemble", "propose_move", "summarize", "traverse",
]
