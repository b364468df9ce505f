//! Monte Carlo estimation of detection delay and mean time to false alarm.
//!
//! Paths run in parallel; each owns its random stream and detector, and the
//! per-path outcomes are reduced in path order so results do not depend on
//! the thread count.

use rayon::prelude::*;

use super::model::{ChangeModel, ChangePoint};
use super::rng::stream_rng;
use crate::corrstats::summary_statistic;
use crate::error::{invalid, Result};
use crate::qcd::{GlrConfig, GlrDetector, StoppingRule};
use crate::vdensity::{sample_v, ModelParams, ShapeParam};

/// Default hard horizon per path.
pub const DEFAULT_HORIZON: u64 = 1_000_000;

/// Produces the summary value of block `m` on path `path`.
pub trait SummarySource: Sync {
    fn gamma(&self) -> ChangePoint;
    fn value(&self, path: u64, m: u64) -> Result<f64>;
}

/// Full pipeline: Gaussian block generation followed by `V_δ`.
#[derive(Debug, Clone)]
pub struct PipelineSource {
    pub model: ChangeModel,
    pub delta: usize,
}

impl PipelineSource {
    pub fn new(model: ChangeModel, delta: usize) -> Self {
        Self { model, delta }
    }

    pub fn with_gamma(&self, gamma: ChangePoint) -> Self {
        Self {
            model: self.model.with_gamma(gamma),
            delta: self.delta,
        }
    }
}

impl SummarySource for PipelineSource {
    fn gamma(&self) -> ChangePoint {
        self.model.gamma()
    }

    fn value(&self, path: u64, m: u64) -> Result<f64> {
        Ok(summary_statistic(&self.model.block_at(path, m), self.delta)?.v)
    }
}

/// Fast path: V drawn directly from the limiting density, `J = pre_j`
/// before the change and `post_j` after.
#[derive(Debug, Clone, Copy)]
pub struct FastPathSource {
    pub params: ModelParams,
    pub pre_j: ShapeParam,
    pub post_j: ShapeParam,
    pub gamma: ChangePoint,
    pub seed: u64,
}

impl FastPathSource {
    /// Null stream, `J = 1` throughout.
    pub fn null(params: ModelParams, seed: u64) -> Self {
        Self {
            params,
            pre_j: ShapeParam::ONE,
            post_j: ShapeParam::ONE,
            gamma: ChangePoint::Never,
            seed,
        }
    }

    /// Post-change law from the first block.
    pub fn post_change(params: ModelParams, post_j: ShapeParam, seed: u64) -> Self {
        Self {
            params,
            pre_j: ShapeParam::ONE,
            post_j,
            gamma: ChangePoint::At(1),
            seed,
        }
    }

    pub fn with_gamma(mut self, gamma: ChangePoint) -> Self {
        self.gamma = gamma;
        self
    }
}

impl SummarySource for FastPathSource {
    fn gamma(&self) -> ChangePoint {
        self.gamma
    }

    fn value(&self, path: u64, m: u64) -> Result<f64> {
        let mut rng = stream_rng(self.seed, path, m);
        let j = if self.gamma.is_post(m) { self.post_j } else { self.pre_j };
        Ok(sample_v(&self.params, j, &mut rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub paths: usize,
    pub horizon: u64,
}

impl TrialConfig {
    pub fn new(paths: usize) -> Self {
        Self {
            paths,
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    /// Configured number of paths.
    pub paths: usize,
    /// Paths that entered the average (false alarms before γ are excluded
    /// from conditional delays).
    pub used: usize,
    pub estimate: f64,
    /// Sample standard deviation over `sqrt(used)`; NaN when `used < 2`.
    pub std_error: f64,
    pub threshold: f64,
    /// Paths that reached the horizon without stopping; they enter the
    /// average at the horizon, so the estimate is then a lower bound.
    pub censored: usize,
    /// Paths that stopped before the change point.
    pub false_alarms: usize,
}

impl McResult {
    pub fn is_censored(&self) -> bool {
        self.censored > 0
    }

    pub fn fully_censored(&self) -> bool {
        self.paths > 0 && self.censored == self.paths
    }
}

/// Stopping time of one path (`None` when the horizon is reached).
pub fn stopping_time<S, R>(source: &S, rule: &R, path: u64, horizon: u64) -> Result<Option<u64>>
where
    S: SummarySource + ?Sized,
    R: StoppingRule,
{
    let mut rule = rule.clone();
    for m in 1..=horizon {
        if rule.observe(source.value(path, m)?)? {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Stopping times of paths `0..paths`, in path order.
pub fn stopping_times<S, R>(source: &S, rule: &R, trial: &TrialConfig) -> Result<Vec<Option<u64>>>
where
    S: SummarySource + ?Sized,
    R: StoppingRule + Sync,
{
    (0..trial.paths as u64)
        .into_par_iter()
        .map(|path| stopping_time(source, rule, path, trial.horizon))
        .collect()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E_γ[τ - γ | τ ≥ γ]` for the source's change point, with any stopping rule.
pub fn run_conditional_delay<S, R>(source: &S, rule: &R, threshold: f64, trial: &TrialConfig) -> Result<McResult>
where
    S: SummarySource + ?Sized,
    R: StoppingRule + Sync,
{
    let gamma = match source.gamma() {
        ChangePoint::At(g) => g,
        ChangePoint::Never => return Err(invalid("gamma", "delay trials need a finite change point")),
    };
    if trial.horizon < gamma {
        return Err(invalid("horizon", "horizon must reach the change point"));
    }
    let taus = stopping_times(source, rule, trial)?;
    let mut delays = Vec::with_capacity(taus.len());
    let (mut censored, mut false_alarms) = (0, 0);
    for tau in taus {
        match tau {
            Some(t) if t < gamma => false_alarms += 1,
            Some(t) => delays.push((t - gamma) as f64),
            None => {
                censored += 1;
                delays.push((trial.horizon - gamma) as f64);
            }
        }
    }
    let (estimate, std_error) = mean_and_se(&delays);
    Ok(McResult {
        paths: trial.paths,
        used: delays.len(),
        estimate,
        std_error,
        threshold,
        censored,
        false_alarms,
    })
}

/// Mean delay `E_1[τ - 1]` of the GLR detector with the change at the first block.
pub fn run_delay_trial<S>(source: &S, config: &GlrConfig, params: &ModelParams, trial: &TrialConfig) -> Result<McResult>
where
    S: SummarySource + ?Sized,
{
    if source.gamma() != ChangePoint::At(1) {
        return Err(invalid("gamma", "delay trials use the change at the first block"));
    }
    let det = GlrDetector::new(*config, *params);
    run_conditional_delay(source, &det, config.threshold, trial)
}

/// Mean time to false alarm `E_∞[τ]` with any stopping rule.
pub fn run_mtfa_with<S, R>(source: &S, rule: &R, threshold: f64, trial: &TrialConfig) -> Result<McResult>
where
    S: SummarySource + ?Sized,
    R: StoppingRule + Sync,
{
    if source.gamma() != ChangePoint::Never {
        return Err(invalid("gamma", "false-alarm trials use a stream without change"));
    }
    let taus = stopping_times(source, rule, trial)?;
    let censored = taus.iter().filter(|t| t.is_none()).count();
    let times: Vec<f64> = taus.into_iter().map(|t| t.unwrap_or(trial.horizon) as f64).collect();
    let (estimate, std_error) = mean_and_se(&times);
    Ok(McResult {
        paths: trial.paths,
        used: times.len(),
        estimate,
        std_error,
        threshold,
        censored,
        false_alarms: 0,
    })
}

/// Mean time to false alarm of the GLR detector.
pub fn run_mtfa_trial<S>(source: &S, config: &GlrConfig, params: &ModelParams, trial: &TrialConfig) -> Result<McResult>
where
    S: SummarySource + ?Sized,
{
    let det = GlrDetector::new(*config, *params);
    run_mtfa_with(source, &det, config.threshold, trial)
}
