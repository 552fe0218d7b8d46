"""Correlation structure, box clustering and log t convergence clubs for panels of price indices."""

from .boxcluster import (
    AnnealSchedule,
    Partition,
    affinity_matrix,
    anneal_order,
    best_of,
    consensus_cluster,
    greedy_partition,
    seriation_cost,
)
from .errors import ClubConvError, DegenerateError, InvalidInputError, PanelError
from .factor import (
    ClubTrend,
    DifferentialPaths,
    FactorFit,
    club_trend_analysis,
    differentials,
    fit_factor,
    partial_corr,
    residual_panel,
)
from .hp import HpParams, hp_panel, hp_trend
from .logt import ClubSet, LogTParams, LogTResult, club_cluster, logt_regression, transition_paths
from .panel import Panel, load_panel, read_panel, write_panel
from .report import PipelineConfig, run_pipeline
from .stats import (
    CorrMatrix,
    EigenSystem,
    contribution_ratios,
    decompose_market,
    eigen_sym,
    eigenportfolio,
    pearson_corr,
    portfolio_weights,
)
from .synth import CommonTrend, GenParams, gen_panel, planted_clubs

__all__ = [name for name in dir() if not name.startswith("_")]
