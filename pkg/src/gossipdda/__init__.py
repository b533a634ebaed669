"""Distributed dual averaging over networks with exact or gossip mini-batch averaging."""

from .averaging import (
    AveragingProtocol,
    AveragingReport,
    exact,
    fixed_point_map,
    gossip,
    gossip_iterations_for_accuracy,
    kstar_bound,
    kstar_theorem2,
    run_averaging,
    verify_fixed_point,
)
from .data import Dataset, SampleStream, generate_synthetic, read_idx, write_idx
from .dda import NetworkState, ReferenceState, RoundTrace, Schedule, error_vectors, run_round, update_reference
from .errors import *  # noqa: F401,F403
from .experiment import (
    ExperimentConfig,
    RunResult,
    emit_plots,
    load_config,
    preset_configs,
    rounds_for_epsilon,
    run_experiment,
)
from .losses import (
    Ball,
    MultinomialLogistic,
    QuadraticLoss,
    compute_reference_optimum,
    expected_loss,
    make_loss,
)
from .metrics import RegretLedger, RuntimeModel, optimality_gap, regret_ratio_curve
from .topology import Graph, SpectralInfo, lazify, make_graph, metropolis_weights, spectral_info

__version__ = "0.1.0"
