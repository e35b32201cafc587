"""Credit-growth volatility toolkit.

Estimation of a stochastic volatility model with leverage by correlated
pseudo-marginal MCMC, structural shock extraction, local projection
impulse responses, and pruned third-order model IRFs with an impact
decomposition. See the README for the CLI pipeline.
"""

from .timeseries import TimeSeries, load_csv, growth_rate_demeaned, lead_lag_correlation
from .sv_model import (
    SvParams,
    PriorSpec,
    ShockSet,
    log_observation_density,
    transition_moments,
    log_prior,
    simulate,
    extract_shocks,
)
from .particle_filter import (
    SeedBlock,
    ParticleSystem,
    ParticleFilterError,
    make_seed_block,
    correlate_seed,
    sorted_multinomial_resample,
    correlated_pf,
    backward_simulate,
)
from .pmmh import (
    ChainConfig,
    PosteriorDraws,
    SvPmmhEstimator,
    run_chain,
    summarize,
    volatility_path,
)
from .local_projections import (
    LpSpec,
    LpResult,
    LocalProjections,
    newey_west,
    run_lp,
    standardize_shock,
)
from .pruned_irf import (
    RbcCalibration,
    PrunedSolution,
    PrunedState,
    decompose_impact,
    demo_solution_path,
    irf,
    load_solution,
    pruned_step,
    save_solution,
    stochastic_steady_state,
    zeta_ss_bound,
)
from .manifest import RunManifest, read_manifest, sha256_digest, write_manifest

__version__ = "0.1.0"

__all__ = [
    "TimeSeries",
    "load_csv",
    "growth_rate_demeaned",
    "lead_lag_correlation",
    "SvParams",
    "PriorSpec",
    "ShockSet",
    "log_observation_density",
    "transition_moments",
    "log_prior",
    "simulate",
    "extract_shocks",
    "SeedBlock",
    "ParticleSystem",
    "ParticleFilterError",
    "make_seed_block",
    "correlate_seed",
    "sorted_multinomial_resample",
    "correlated_pf",
    "backward_simulate",
    "ChainConfig",
    "PosteriorDraws",
    "SvPmmhEstimator",
    "run_chain",
    "summarize",
    "volatility_path",
    "LpSpec",
    "LpResult",
    "LocalProjections",
    "newey_west",
    "run_lp",
    "standardize_shock",
    "RbcCalibration",
    "PrunedSolution",
    "PrunedState",
    "decompose_impact",
    "demo_solution_path",
    "irf",
    "load_solution",
    "pruned_step",
    "save_solution",
    "stochastic_steady_state",
    "zeta_ss_bound",
    "RunManifest",
    "read_manifest",
    "sha256_digest",
    "write_manifest",
    "__version__",
]
