"""U-turn Markov chains on random hierarchy grammars.

Simulation and theory toolkit: exact posterior denoising by message
passing, mask-resample chain dynamics with optional Metropolis energy
biasing, layer-wise relaxation observables with analytic ergodic
baselines, branching predictions of the percolation and layer-inversion
thresholds, and brute-force enumeration oracles for small instances.
"""

__version__ = "0.1.0"

from .grammar import (
    MASK,
    Grammar,
    GrammarParams,
    TreeSample,
    generate,
    generate_batch,
    grammar_from_json,
    grammar_to_json,
    load_grammar,
    sample_grammar,
    save_grammar,
)
from .inference import (
    InconsistentLeavesError,
    Invalid,
    MaskedLeaves,
    MessageSet,
    parse,
    posterior_marginals,
    posterior_sample,
    upward_pass,
)
from .chain import (
    ZERO,
    ChainTrace,
    LatentCount,
    LeafCount,
    UturnConfig,
    ZeroEnergy,
    exact_kernel,
    mh_step,
    run_chain,
    run_chain_batch,
    uturn_step,
)
from .observables import (
    NOT_RELAXED,
    BaselineStats,
    CorrelationCurve,
    ergodic_baseline,
    independent_pair_stats,
    layer_overlap,
    normalized_curve,
    plateau,
    relaxation_time,
)
from .theory import (
    NoBracketError,
    ThresholdReport,
    admissible_counts,
    branching_asymptotic,
    branching_finite,
    cascade_probability,
    solve_f_inv,
    solve_f_per,
    threshold_report,
)
from .oracle import (
    BudgetExceededError,
    EmptySupportError,
    FlipGraph,
    SentenceSet,
    build_flip_graph,
    enumerate_sentences,
    exact_component_plateau,
    posterior_brute,
    reweighted_law,
)
from .harness import ExperimentConfig, run_sweep
