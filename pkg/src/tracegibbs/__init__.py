"""Partition-function estimation for Gibbs distributions with trace-averaged MCMC."""

from .chains import ChainBounds, GibbsChain, MatrixChain, ProductChain, make_rng
from .errors import (EmptyTraceError, InvalidStateError, ModelFormatError,
                     OracleUnavailableError, ParameterError, TraceGibbsError,
                     UnsupportedRangeError)
from .meanest import MeanEstConfig, rel_mean_est
from .models import IsingModel, TableModel, VotingModel, fig3_voting_model, load_model
from .oracle import exact_partition, log_partition
from .pipelines import (EstimateReport, PipelineConfig, baseline_tpa_ppe, estimate,
                        parallel_trace_gibbs, superchain_trace_gibbs)
from .tpa import Schedule, tpa_schedule

__all__ = [
    "ChainBounds", "GibbsChain", "MatrixChain", "ProductChain", "make_rng",
    "EmptyTraceError", "InvalidStateError", "ModelFormatError", "OracleUnavailableError",
    "ParameterError", "TraceGibbsError", "UnsupportedRangeError",
    "MeanEstConfig", "rel_mean_est",
    "IsingModel", "TableModel", "VotingModel", "fig3_voting_model", "load_model",
    "exact_partition", "log_partition",
    "EstimateReport", "PipelineConfig", "baseline_tpa_ppe", "estimate",
    "parallel_trace_gibbs", "superchain_trace_gibbs",
    "Schedule", "tpa_schedule",
]
