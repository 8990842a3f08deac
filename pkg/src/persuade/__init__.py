"""Optimal dynamic information provision: greedy disclosure in closed form,
belief-space policy evaluation, and concavification-based value iteration."""

__version__ = "0.1.0"

from .exceptions import (
    AmbiguousInvariantError,
    ConfigError,
    DimensionMismatchError,
    DivergenceError,
    InvalidArgumentError,
    InvalidWeightsError,
    NoPreimageError,
    NotApplicableError,
    NotBayesPlausibleError,
    OutOfSimplexError,
    PersuadeError,
    UndefinedPosteriorError,
)
from .model import (
    Belief,
    MarkovModel,
    PayoffStructure,
    Region,
    classify,
    drift,
    drift_preimage,
    expected_payoff,
    frontier_extremes,
    invariant_measure,
    invests,
    renewal_chain,
)
from .splitting import (
    SignalKernel,
    Splitting,
    bayes_posterior,
    make_splitting,
    message_distribution,
    no_disclosure,
    signal_kernel,
)
from .greedy import (
    GreedySplit,
    NegativeOrdering,
    cell_contains,
    cell_index,
    ell,
    greedy_split,
    lp_value_oracle,
    max_stage_payoff,
    p_polytope,
    p_polytope_contains,
)
from .evaluate import (
    BreakpointSequence,
    EntryTime,
    PolicyValueRequest,
    TrajectoryRecord,
    breakpoints,
    drift_bound,
    entry_time,
    excess,
    first_best_bound,
    greedy_value,
    greedy_value_many,
    simulate_play,
)
from .value_iteration import (
    SimplexGrid,
    SolveResult,
    ValueField,
    bellman_step,
    concavify,
    envelope_value,
    extract_splitting,
    interpolate,
    solve,
)
