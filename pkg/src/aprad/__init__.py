"""Error-free sampling from autoregressive models.

Given a black-box, prefix-closed test for undesirable sequences, this
package samples from a model while guaranteeing the output never fails the
test, trading off distribution fidelity against computation: rejection
sampling and sampling-without-replacement (exact but potentially slow),
constrained per-token masking (fast but distorting), and approximately
aligned decoding, which backtracks probabilistically via speculative
acceptance and sits between the two.
"""

from .core import (
    AllZeroError,
    CountingModel,
    EpisodeStats,
    GenerationLimits,
    InvalidDistError,
    InvocationBudgetError,
    Model,
    Sequence,
    TableModel,
    TransformedModel,
    UniformModel,
    Vocab,
    apply_temperature,
    apply_top_k,
    apply_top_p,
    check_distribution,
    normalize,
    sample_token,
    sequence_probability,
)
from .evaluation import (
    DEFAULT_ERROR_SETS,
    AllExcludedError,
    InfiniteDivergenceError,
    TestbenchReport,
    TestbenchRow,
    empirical_distribution,
    ideal_distribution,
    kl_divergence,
    run_testbench,
)
from .exclusion import ExclusionTrie, FullyExcludedError
from .oracles import (
    BannedSymbolSet,
    ErrorOracle,
    PatternParseError,
    PatternSet,
    format_pattern_spec,
    parse_pattern_spec,
    verify_prefix_closure,
)
from .samplers import (
    METHODS,
    GenerationOutcome,
    Strategy,
    aprad_strategy,
    asap_strategy,
    constrained_strategy,
    error_free_decoding,
    generate,
    rejection_sample,
    residual_distribution,
    spec_sample,
    unconstrained_generate,
)

__version__ = "0.1.0"

__all__ = [
    "AllExcludedError",
    "AllZeroError",
    "BannedSymbolSet",
    "CountingModel",
    "DEFAULT_ERROR_SETS",
    "EpisodeStats",
    "ErrorOracle",
    "ExclusionTrie",
    "FullyExcludedError",
    "GenerationLimits",
    "GenerationOutcome",
    "InfiniteDivergenceError",
    "InvalidDistError",
    "InvocationBudgetError",
    "METHODS",
    "Model",
    "PatternParseError",
    "PatternSet",
    "Sequence",
    "Strategy",
    "TableModel",
    "TestbenchReport",
    "TestbenchRow",
    "TransformedModel",
    "UniformModel",
    "Vocab",
    "apply_temperature",
    "apply_top_k",
    "apply_top_p",
    "aprad_strategy",
    "asap_strategy",
    "check_distribution",
    "constrained_strategy",
    "empirical_distribution",
    "error_free_decoding",
    "format_pattern_spec",
    "generate",
    "ideal_distribution",
    "kl_divergence",
    "normalize",
    "parse_pattern_spec",
    "rejection_sample",
    "residual_distribution",
    "run_testbench",
    "sample_token",
    "sequence_probability",
    "spec_sample",
    "unconstrained_generate",
    "verify_prefix_closure",
]
