"""Runtime-adaptive compression-plan search for convolutional backbones.

Given a backbone descriptor, an operator catalog, an accuracy profile, and a
device profile, the engine searches in milliseconds (and without touching any
weights) for the per-layer combination of retraining-free compression
operators that best trades accuracy loss against arithmetic-intensity energy
efficiency under time-varying battery, cache, and latency budgets.
"""

from .arch import (
    CostBreakdown,
    LayerSpec,
    NetworkSpec,
    conv_layer,
    count_layer,
    count_network,
    load_network,
    make_network,
    save_network,
    validate,
)
from .context import (
    AdaptationEvent,
    AppConfig,
    ContextState,
    ContextTrace,
    TraceEntry,
    TriggerPolicy,
    budgets_from_trace_entry,
    load_trace,
    save_trace,
    should_trigger,
    simulate,
    weights_from_battery,
)
from .costmodel import (
    CostModelConfig,
    DeviceProfile,
    PerfReport,
    aggregate_intensities,
    build_report,
    energy_cost,
    energy_proxy,
    latency,
    load_device,
    norm,
    objective_score,
)
from .encoding import (
    CompressionPlan,
    PlanEncoding,
    classic_binary_length,
    decode,
    encode,
    make_plan,
    parse_encoding,
    search_space_sizes,
)
from .errors import (
    ConvShrinkError,
    InvalidOperatorError,
    MalformedEncodingError,
    NoFeasibleCandidateError,
    ProfileIncompleteError,
    SearchSpaceTooLargeError,
    SpecValidationError,
)
from .operators import (
    CompressionOperator,
    OperatorCatalog,
    OperatorGroup,
    apply_assignments,
    apply_channel_scale,
    apply_depth_skip,
    apply_fire,
    apply_group,
    apply_lowrank,
    channel_scale_operator,
    default_catalog,
    depth_skip_operator,
    fire_operator,
    lowrank_operator,
    make_catalog,
)
from .oracle import (
    AccuracyProfile,
    ImportanceRanking,
    load_profile,
    predict_accuracy,
    save_profile,
    synthetic_profile,
    validate_profile,
)
from .search import (
    Candidate,
    MutationConfig,
    SearchBudget,
    SearchResult,
    exhaustive_search,
    greedy_search,
    mutate,
    pareto_front,
    pareto_indices,
    pick_two,
    rescale_search,
    runtime3c,
    violated_constraints,
)

__version__ = "0.1.0"
