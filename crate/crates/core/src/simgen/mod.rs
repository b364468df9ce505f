//! Change-point scenario generation and Monte Carlo evaluation.

pub mod covariance;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod scenario;

pub use covariance::{bartlett_wishart, cholesky, sample_wishart_block_cov, CholeskyFactor, CovarianceSpec};
pub use model::{random_diagonal, ChangeModel, ChangePoint, MeanPolicy};
pub use montecarlo::{
    run_conditional_delay, run_delay_trial, run_mtfa_trial, run_mtfa_with, stopping_time, stopping_times,
    FastPathSource, McResult, PipelineSource, SummarySource, TrialConfig, DEFAULT_HORIZON,
};
pub use rng::stream_rng;
pub use scenario::{realize, run_campaign, Campaign, Realization, ResultRow, Scenario, ScenarioError, CSV_HEADER};
