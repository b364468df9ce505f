//! Sequential detectors on the stream of summary values.
//!
//! Observations enter as `W_i = w_transform(V_i)`, under which the per-sample
//! log-likelihood ratio of `f_V(·; J)` against `f_V(·; 1)` is
//! `log J - (J - 1)·W_i`. The GLR rule maximizes the summed ratio over the
//! candidate change point ℓ and over `J` with `|J - 1| ≥ ε`, and stops the
//! first time the maximum exceeds `A`.

use std::collections::VecDeque;

use crate::corrstats::SummaryValue;
use crate::error::{invalid, Error, Result};
use crate::vdensity::{kl_divergence, w_unchecked, ModelParams, ShapeParam};

/// Score returned for all-zero segments (every V equal to 1).
pub const DEGENERATE_SCORE: f64 = 1e6;

/// Default minimum change magnitude.
pub const DEFAULT_EPSILON: f64 = 1.5;

/// Which alternatives the supremum over `J` ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sidedness {
    /// `J ≥ 1 + ε`.
    #[default]
    IncreaseOnly,
    /// `J ≥ 1 + ε` or `0 < J ≤ 1 - ε`.
    TwoSided,
}

/// Range of candidate change points retained by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Only the most recent `w` observations.
    Bounded(usize),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlrConfig {
    pub epsilon: f64,
    /// Log-likelihood threshold `A`. `±inf` are accepted (never / always stop).
    pub threshold: f64,
    pub window: Window,
    pub sidedness: Sidedness,
}

impl GlrConfig {
    /// Increase-only detector with the default window for `threshold`.
    pub fn new(epsilon: f64, threshold: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        if threshold.is_nan() {
            return Err(invalid("threshold", "must not be NaN"));
        }
        Ok(Self {
            epsilon,
            threshold,
            window: Window::Bounded(default_window(threshold, epsilon)),
            sidedness: Sidedness::IncreaseOnly,
        })
    }

    /// Threshold calibrated as `A = log β`.
    pub fn from_beta(beta: f64, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, calibrate_threshold(beta)?)
    }

    pub fn with_window(mut self, window: Window) -> Result<Self> {
        if window == Window::Bounded(0) {
            return Err(invalid("window", "bounded window must be at least 1"));
        }
        self.window = window;
        Ok(self)
    }

    pub fn with_sidedness(mut self, sidedness: Sidedness) -> Self {
        self.sidedness = sidedness;
        self
    }
}

/// `ceil(4·log β / I(1 + ε))` with `log β = A`, at least 1.
pub fn default_window(threshold: f64, epsilon: f64) -> usize {
    if !threshold.is_finite() || threshold <= 0.0 {
        return 1;
    }
    let info = kl_divergence(ShapeParam::new(1.0 + epsilon).unwrap_or(ShapeParam::ONE));
    ((4.0 * threshold / info).ceil() as usize).max(1)
}

/// `A = log β`.
pub fn calibrate_threshold(beta: f64) -> Result<f64> {
    if !(beta >= 1.0) {
        return Err(invalid("beta", format!("must be >= 1, got {beta}")));
    }
    Ok(beta.ln())
}

/// Clamped GLR score of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentScore {
    pub score: f64,
    /// Maximizing `J` within the admissible set.
    pub j_hat: f64,
    /// Set when `ΣW = 0`; `score` is then [`DEGENERATE_SCORE`].
    pub degenerate: bool,
}

fn log_lik_ratio(count: f64, sum: f64, j: f64) -> f64 {
    count * j.ln() - (j - 1.0) * sum
}

fn score_from_sums(count: usize, sum: f64, epsilon: f64, sidedness: Sidedness) -> SegmentScore {
    let count = count as f64;
    let unclamped = count / sum;
    let (mut best, mut degenerate) = if sum == 0.0 {
        (
            SegmentScore {
                score: DEGENERATE_SCORE,
                j_hat: f64::INFINITY,
                degenerate: true,
            },
            true,
        )
    } else {
        let j = unclamped.max(1.0 + epsilon);
        (
            SegmentScore {
                score: log_lik_ratio(count, sum, j),
                j_hat: j,
                degenerate: false,
            },
            false,
        )
    };
    if sidedness == Sidedness::TwoSided && epsilon < 1.0 {
        let j = unclamped.min(1.0 - epsilon);
        let score = log_lik_ratio(count, sum, j);
        if score > best.score {
            best = SegmentScore {
                score,
                j_hat: j,
                degenerate: false,
            };
            degenerate = false;
        }
    }
    best.degenerate = degenerate;
    best
}

/// `sup_{J admissible} Σ [log J - (J - 1)·W_i]`, attained at the MLE
/// `m'/ΣW` clamped into the admissible set.
pub fn segment_score(w_values: &[f64], epsilon: f64, sidedness: Sidedness) -> Result<SegmentScore> {
    if w_values.is_empty() {
        return Err(invalid("w_values", "segment must be nonempty"));
    }
    if let Some(&bad) = w_values.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Domain {
            what: "segment_score",
            value: bad,
            domain: "[0, inf)",
        });
    }
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    let sum: f64 = w_values.iter().sum();
    Ok(score_from_sums(w_values.len(), sum, epsilon, sidedness))
}

/// Diagnostic output once the detector stops. Times are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub stopping_time: u64,
    pub change_point_estimate: u64,
    pub j_estimate: f64,
}

/// Buffered transformed statistics and the running GLR statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    m: u64,
    w_buffer: VecDeque<f64>,
    current_stat: f64,
    best_ell: u64,
    best_j: f64,
    degenerate: bool,
    stopped: bool,
}

impl Default for DetectorState {
    fn default() -> Self {
        Self::new()
    }
}

impl DetectorState {
    pub fn new() -> Self {
        Self {
            m: 0,
            w_buffer: VecDeque::new(),
            current_stat: f64::NEG_INFINITY,
            best_ell: 0,
            best_j: f64::NAN,
            degenerate: false,
            stopped: false,
        }
    }

    /// Samples seen.
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn current_stat(&self) -> f64 {
        self.current_stat
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    /// True when the current maximum came from an all-zero segment.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn w_buffer(&self) -> &VecDeque<f64> {
        &self.w_buffer
    }

    /// Candidate change point and clamped MLE achieving the current maximum.
    pub fn argmax(&self) -> (u64, f64) {
        (self.best_ell, self.best_j)
    }

    pub fn verdict(&self) -> Option<Verdict> {
        self.stopped.then_some(Verdict {
            stopping_time: self.m,
            change_point_estimate: self.best_ell,
            j_estimate: self.best_j,
        })
    }

    /// Feeds one summary value.
    pub fn step(&mut self, v: SummaryValue, config: &GlrConfig, params: &ModelParams) -> Result<()> {
        if v.delta != params.delta() {
            return Err(invalid(
                "v",
                format!("summary uses delta = {}, model uses {}", v.delta, params.delta()),
            ));
        }
        self.step_w(w_unchecked(v.v, params), config)
    }

    /// Feeds one transformed statistic `W`. O(window) per call.
    pub fn step_w(&mut self, w: f64, config: &GlrConfig) -> Result<()> {
        if self.stopped {
            return Err(invalid("state", "detector has already stopped"));
        }
        if !(w >= 0.0) {
            return Err(Error::Domain {
                what: "step_w",
                value: w,
                domain: "[0, inf)",
            });
        }
        self.m += 1;
        self.w_buffer.push_back(w);
        if let Window::Bounded(cap) = config.window {
            while self.w_buffer.len() > cap {
                self.w_buffer.pop_front();
            }
        }

        let mut best = SegmentScore {
            score: f64::NEG_INFINITY,
            j_hat: f64::NAN,
            degenerate: false,
        };
        let mut best_len = 0;
        let mut sum = 0.0;
        for (len, &w) in self.w_buffer.iter().rev().enumerate().map(|(i, w)| (i + 1, w)) {
            sum += w;
            let s = score_from_sums(len, sum, config.epsilon, config.sidedness);
            if s.score > best.score {
                best = s;
                best_len = len;
            }
        }
        self.current_stat = best.score;
        self.best_ell = self.m + 1 - best_len as u64;
        self.best_j = best.j_hat;
        self.degenerate = best.degenerate;
        if self.current_stat > config.threshold {
            self.stopped = true;
        }
        Ok(())
    }
}

/// Functional form of [`DetectorState::step`].
pub fn glr_step(
    state: &DetectorState,
    v: SummaryValue,
    config: &GlrConfig,
    params: &ModelParams,
) -> Result<DetectorState> {
    let mut next = state.clone();
    next.step(v, config, params)?;
    Ok(next)
}

/// Per-step output of a detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub m: u64,
    pub v: f64,
    pub w: f64,
    pub stat: f64,
    pub stopped: bool,
}

/// A stopping rule fed one summary value at a time.
pub trait StoppingRule: Clone + Send {
    /// Processes one value; returns true once the rule has stopped.
    fn observe(&mut self, v: f64) -> Result<bool>;
    fn verdict(&self) -> Option<Verdict>;
}

/// GLR detector bundling configuration, model constants and state.
#[derive(Debug, Clone, PartialEq)]
pub struct GlrDetector {
    config: GlrConfig,
    params: ModelParams,
    state: DetectorState,
}

impl GlrDetector {
    pub fn new(config: GlrConfig, params: ModelParams) -> Self {
        Self {
            config,
            params,
            state: DetectorState::new(),
        }
    }

    pub fn config(&self) -> &GlrConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    pub fn push(&mut self, v: f64) -> Result<StepReport> {
        let sv = SummaryValue::new(v, self.params.delta())?;
        let w = w_unchecked(sv.v, &self.params);
        self.state.step_w(w, &self.config)?;
        Ok(StepReport {
            m: self.state.m,
            v,
            w,
            stat: self.state.current_stat,
            stopped: self.state.stopped,
        })
    }

    pub fn reset(&mut self) {
        self.state = DetectorState::new();
    }
}

impl StoppingRule for GlrDetector {
    fn observe(&mut self, v: f64) -> Result<bool> {
        Ok(self.push(v)?.stopped)
    }

    fn verdict(&self) -> Option<Verdict> {
        self.state.verdict()
    }
}

/// CuSum with a known post-change parameter:
/// `S_m = max(0, S_{m-1}) + log J1 - (J1 - 1)·W_m`, stop when `S_m > A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumDetector {
    j1: f64,
    threshold: f64,
    params: ModelParams,
    stat: f64,
    m: u64,
    run_start: u64,
    stopped: bool,
}

impl CusumDetector {
    pub fn new(j1: ShapeParam, params: ModelParams, threshold: f64) -> Result<Self> {
        if j1.value() == 1.0 {
            return Err(invalid("J1", "post-change parameter must differ from 1"));
        }
        if threshold.is_nan() {
            return Err(invalid("threshold", "must not be NaN"));
        }
        Ok(Self {
            j1: j1.value(),
            threshold,
            params,
            stat: 0.0,
            m: 0,
            run_start: 1,
            stopped: false,
        })
    }

    pub fn stat(&self) -> f64 {
        self.stat
    }

    pub fn step_w(&mut self, w: f64) -> Result<bool> {
        if self.stopped {
            return Err(invalid("state", "detector has already stopped"));
        }
        self.m += 1;
        if self.stat <= 0.0 {
            self.stat = 0.0;
            self.run_start = self.m;
        }
        self.stat += self.j1.ln() - (self.j1 - 1.0) * w;
        self.stopped = self.stat > self.threshold;
        Ok(self.stopped)
    }
}

impl StoppingRule for CusumDetector {
    fn observe(&mut self, v: f64) -> Result<bool> {
        let sv = SummaryValue::new(v, self.params.delta())?;
        self.step_w(w_unchecked(sv.v, &self.params))
    }

    fn verdict(&self) -> Option<Verdict> {
        self.stopped.then_some(Verdict {
            stopping_time: self.m,
            change_point_estimate: self.run_start,
            j_estimate: self.j1,
        })
    }
}

/// Runs the known-J CuSum over a finite stream of summary values.
pub fn cusum_known_j<I>(stream: I, j1: ShapeParam, params: &ModelParams, threshold: f64) -> Result<Option<Verdict>>
where
    I: IntoIterator<Item = f64>,
{
    let mut det = CusumDetector::new(j1, *params, threshold)?;
    for v in stream {
        if det.observe(v)? {
            return Ok(det.verdict());
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(10, 100, 1).unwrap()
    }

    #[test]
    fn segment_score_examples() {
        let s = segment_score(&[1.0; 4], 1.5, Sidedness::IncreaseOnly).unwrap();
        assert_eq!(s.j_hat, 2.5);
        assert!((s.score - 4.0 * (2.5_f64.ln() - 1.5)).abs() < 1e-12);
        assert!((s.score + 2.334_837_1).abs() < 1e-6);

        let s = segment_score(&[0.2], 1.5, Sidedness::IncreaseOnly).unwrap();
        assert!((s.j_hat - 5.0).abs() < 1e-12);
        assert!((s.score - (5.0_f64.ln() - 0.8)).abs() < 1e-12);
        assert!((s.score - 0.809_437_9).abs() < 1e-6);
    }

    #[test]
    fn interior_mle_score_is_kl() {
        // ΣW = m'/Ĵ with Ĵ = 4 ≥ 2.5
        let w = [0.1, 0.3, 0.25, 0.35];
        let s = segment_score(&w, 1.5, Sidedness::IncreaseOnly).unwrap();
        assert!((s.j_hat - 4.0).abs() < 1e-12);
        let kl = kl_divergence(ShapeParam::new(4.0).unwrap());
        assert!((s.score - 4.0 * kl).abs() < 1e-10);
        assert!(s.score >= 0.0);
    }

    #[test]
    fn degenerate_segment_sentinel() {
        let s = segment_score(&[0.0, 0.0], 1.5, Sidedness::IncreaseOnly).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.score, DEGENERATE_SCORE);
        // decreasing branch is finite with the clamp
        let s = segment_score(&[0.0], 0.5, Sidedness::TwoSided).unwrap();
        assert!(s.degenerate);
        assert!(segment_score(&[], 1.5, Sidedness::IncreaseOnly).is_err());
        assert!(segment_score(&[-1.0], 1.5, Sidedness::IncreaseOnly).is_err());
    }

    #[test]
    fn two_sided_picks_decrease() {
        // large W favour J < 1
        let w = [3.0, 4.0, 5.0];
        let one = segment_score(&w, 0.5, Sidedness::IncreaseOnly).unwrap();
        let two = segment_score(&w, 0.5, Sidedness::TwoSided).unwrap();
        assert!(two.score > one.score);
        assert!((two.j_hat - 0.25).abs() < 1e-12);
        // ε ≥ 1 leaves no admissible decrease
        let two = segment_score(&w, 1.5, Sidedness::TwoSided).unwrap();
        assert_eq!(two, segment_score(&w, 1.5, Sidedness::IncreaseOnly).unwrap());
    }

    #[test]
    fn calibration() {
        assert_eq!(calibrate_threshold(1.0).unwrap(), 0.0);
        assert!((calibrate_threshold(1000.0).unwrap() - 6.907_755_279).abs() < 1e-9);
        assert!(calibrate_threshold(0.5).is_err());
        assert!(calibrate_threshold(f64::NAN).is_err());
    }

    #[test]
    fn default_window_scaling() {
        let info = kl_divergence(ShapeParam::new(2.5).unwrap());
        assert_eq!(
            default_window(1000f64.ln(), 1.5),
            (4.0 * 1000f64.ln() / info).ceil() as usize
        );
        assert_eq!(default_window(f64::NEG_INFINITY, 1.5), 1);
        assert_eq!(default_window(f64::INFINITY, 1.5), 1);
    }

    #[test]
    fn never_stops_below_threshold() {
        let cfg = GlrConfig::new(1.5, 1e9).unwrap();
        let mut det = GlrDetector::new(cfg, params());
        for _ in 0..200 {
            assert!(!det.observe(0.9).unwrap());
        }
        assert!(det.verdict().is_none());
    }

    #[test]
    fn stops_immediately_on_neg_inf_threshold() {
        let cfg = GlrConfig::new(1.5, f64::NEG_INFINITY).unwrap();
        let mut det = GlrDetector::new(cfg, params());
        assert!(det.observe(0.5).unwrap());
        let v = det.verdict().unwrap();
        assert_eq!(v.stopping_time, 1);
        assert_eq!(v.change_point_estimate, 1);
        assert!(det.observe(0.5).is_err());
    }

    #[test]
    fn all_ones_stop_via_sentinel() {
        let cfg = GlrConfig::new(1.5, 50.0).unwrap();
        let mut det = GlrDetector::new(cfg, params());
        assert!(det.observe(1.0).unwrap());
        assert!(det.state().degenerate());
    }

    #[test]
    fn window_bounds_buffer() {
        let cfg = GlrConfig::new(1.5, 1e9)
            .unwrap()
            .with_window(Window::Bounded(5))
            .unwrap();
        let mut state = DetectorState::new();
        for i in 0..20 {
            state.step_w(0.1 * i as f64, &cfg).unwrap();
            assert!(state.w_buffer().len() <= 5);
        }
        assert!(GlrConfig::new(1.5, 1.0)
            .unwrap()
            .with_window(Window::Bounded(0))
            .is_err());
    }

    #[test]
    fn cusum_arithmetic() {
        let p = params();
        // log J1 - (J1 - 1) W = 1 with J1 = e²
        let j1 = std::f64::consts::E.powi(2);
        let w = 1.0 / (j1 - 1.0);
        let v = crate::vdensity::w_inverse(w, &p).unwrap();
        let verdict = cusum_known_j(std::iter::repeat_n(v, 20), ShapeParam::new(j1).unwrap(), &p, 4.5)
            .unwrap()
            .unwrap();
        assert_eq!(verdict.stopping_time, 5);
        assert_eq!(verdict.change_point_estimate, 1);

        // W large ⇒ negative increments
        let v = crate::vdensity::w_inverse(5.0, &p).unwrap();
        let none = cusum_known_j(std::iter::repeat_n(v, 500), ShapeParam::new(3.0).unwrap(), &p, 1.0).unwrap();
        assert!(none.is_none());
        assert!(CusumDetector::new(ShapeParam::ONE, p, 1.0).is_err());
    }
}
