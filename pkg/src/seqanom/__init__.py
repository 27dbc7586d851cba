"""Sequential anomaly detection over multiple data sources under a
sampling-budget constraint: LLR statistics, stopping/decision rules,
asymptotically optimal probabilistic sampling, the closed-form design theory
and a reproducible Monte Carlo harness."""

from .errors import (
    CalibrationError,
    CombinatorialBlowupError,
    ConfigError,
    DegenerateReportError,
    InvalidModelError,
    SeqAnomError,
    UndefinedSummaryError,
    UnsupportedRuleError,
)
from .models import (
    CustomModel,
    ProblemSpec,
    SourceModel,
    bernoulli,
    exponential_rate,
    gaussian_mean_shift,
    homogeneous_gaussian_spec,
    two_tier_gaussian_spec,
)
from .llr import (
    LlrState,
    consistency_time,
    gap_at,
    initial_state,
    pairwise_llr,
    update,
)
from .rules import Thresholds, conservative_thresholds, decide, should_stop, variant_for
from .theory import (
    AsymptoticProfile,
    KlSummary,
    are_tandem,
    c_star,
    kl_summaries,
    optimal_time_approx,
    profile,
    q_capacity,
    vmax_oracle,
    xy,
)
from .sampling import (
    BernoulliRule,
    ChernoffRule,
    EqualizingRule,
    OrderingRule,
    TandemRule,
    UniformRule,
    budget_ratio,
    build_frequency_table,
    make_rule,
    pad_marginals,
)
from .harness import (
    CalibrationResult,
    EstimateReport,
    TrialBatch,
    TrialRecord,
    calibrate,
    estimate,
    run_trial,
    simulate_batch,
    sweep_alpha,
    trace_trial,
)
from .config import ExperimentConfig, parse_config, serialize_config

__version__ = "0.1.0"
