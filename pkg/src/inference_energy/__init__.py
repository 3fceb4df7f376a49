"""Bottom-up Monte Carlo estimates of LLM inference energy per query."""

__version__ = "0.1.0"

from .benchmark_data import BenchmarkRecord, load_benchmarks, parse_benchmarks, records_for_model
from .distributions import (
    ExponentialParams,
    LogNormalParams,
    RngState,
    exponential_from_median,
    lognormal_from_quantiles,
    sample_exponential,
    sample_lognormal,
)
from .energy_model import (
    EffectiveLengthMode,
    NodeSpec,
    PowerMode,
    apply_alpha,
    coupled_node_power,
    effective_length,
    energy_per_query,
)
from .estimator import QueryEnergyEstimator
from .fleet import BetaComponents, FleetSpec, compute_beta, daily_energy
from .scenario import (
    AlphaSpec,
    DistributionSummary,
    QuerySample,
    SampleSet,
    ScenarioSpec,
    WorkloadSpec,
    mix_regimes,
    run_scenario,
    sample_query,
    summarize,
)
from .tps_model import LogLinearTPSRegressor, TpsModel, fit_log_linear, fit_models, predict_tps
