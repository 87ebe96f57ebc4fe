"""Decentralized Riemannian conjugate gradient (DRCGD) on the Stiefel manifold."""

from .errors import (
    DimensionMismatch,
    DisconnectedAfterRetries,
    DrcgdError,
    InvalidSize,
    InvalidSpec,
    ParseError,
    SchemaMismatch,
    SingularInput,
    TooFewRows,
    UnknownColumn,
    ValidationError,
)
from .experiment import ExperimentConfig, compare, execute, parse_config, serialize_config
from .network import Graph, WeightMatrix, build_complete, build_erdos_renyi, build_ring, metropolis_weights, mix
from .problems import GlobalProblem, SyntheticSpec, estimate_constants, generate_synthetic, load_matrix
from .solvers import AgentState, IterationRecord, SolverConfig, independent_init, run, shared_init

__version__ = "0.1.0"
