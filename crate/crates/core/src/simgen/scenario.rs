//! Simulation campaigns described by `key = value` scenario files.
//!
//! ```text
//! # delay vs false-alarm trade-off
//! id = wishart-k5
//! n = 10
//! p = 100
//! k = 5
//! dof = 5
//! epsilon = 1.5
//! A = 3, 4, 5, 6
//! paths = 500
//! mtfa_paths = 1500
//! seed = 7
//! ```
//!
//! Results are CSV rows
//! `scenario_id,A,mean_delay,se_delay,mtfa,se_mtfa,j_hat,censored_count`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use super::covariance::sample_wishart_block_cov;
use super::model::{random_diagonal, ChangeModel, ChangePoint, MeanPolicy};
use super::montecarlo::{
    run_conditional_delay, run_mtfa_trial, FastPathSource, McResult, PipelineSource, SummarySource, TrialConfig,
    DEFAULT_HORIZON,
};
use super::rng::{stream_rng, PILOT_STREAM_BASE, WISHART_STREAM};
use crate::corrstats::summary_statistic;
use crate::qcd::{calibrate_threshold, GlrConfig, GlrDetector, Sidedness, Window, DEFAULT_EPSILON};
use crate::vdensity::{mle_j, ModelParams, ShapeParam};

pub const CSV_HEADER: &str = "scenario_id,A,mean_delay,se_delay,mtfa,se_mtfa,j_hat,censored_count";

const KNOWN_KEYS: &[&str] = &[
    "id",
    "n",
    "p",
    "k",
    "dof",
    "delta",
    "gamma",
    "epsilon",
    "beta",
    "A",
    "paths",
    "mtfa_paths",
    "seed",
    "horizon",
    "window",
    "sidedness",
    "sigma_min",
    "sigma_max",
    "mean_scale",
    "j",
    "min_j",
    "max_j",
    "pilot_blocks",
    "max_redraws",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown scenario keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {message}")]
    Value { key: &'static str, message: String },
    #[error("no post-change draw within {redraws} redraws gave a pilot J estimate in [{min}, {max}]")]
    NoAcceptableDraw { redraws: usize, min: f64, max: f64 },
    #[error(transparent)]
    Model(#[from] crate::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowPolicy {
    /// `ceil(4·A / I(1 + ε))` per threshold.
    Auto,
    Fixed(usize),
    Unbounded,
}

/// A parsed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub dof: usize,
    pub delta: usize,
    pub gamma: u64,
    pub epsilon: f64,
    /// Log-likelihood thresholds (from `A`, or `log β` from `beta`).
    pub thresholds: Vec<f64>,
    pub paths: usize,
    pub mtfa_paths: usize,
    pub seed: u64,
    pub horizon: u64,
    pub window: WindowPolicy,
    pub sidedness: Sidedness,
    pub sigma_range: (f64, f64),
    pub mean_scale: f64,
    /// Post-change J for fast-path runs; defaults to the pilot estimate.
    pub fast_path_j: Option<f64>,
    /// Accept a post-change draw only if its pilot `Ĵ` lies in this range.
    pub j_range: Option<(f64, f64)>,
    pub pilot_blocks: usize,
    pub max_redraws: usize,
}

fn parse_num<T: std::str::FromStr>(key: &'static str, raw: &str) -> Result<T, ScenarioError>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse::<T>().map_err(|e| ScenarioError::Value {
        key,
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn parse_list(key: &'static str, raw: &str) -> Result<Vec<f64>, ScenarioError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<f64>(key, s))
        .collect()
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ScenarioError::Syntax {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            if kv.insert(key.clone(), (idx + 1, value.trim().to_string())).is_some() {
                return Err(ScenarioError::Syntax {
                    line: idx + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        let unknown: Vec<String> = kv
            .keys()
            .filter(|k| !KNOWN_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(ScenarioError::UnknownKeys(unknown));
        }
        let get = |k: &str| kv.get(k).map(|(_, v)| v.as_str());
        let req = |k: &'static str| get(k).ok_or(ScenarioError::Missing(k));

        let thresholds = match (get("A"), get("beta")) {
            (Some(a), None) => parse_list("A", a)?,
            (None, Some(b)) => parse_list("beta", b)?
                .into_iter()
                .map(|beta| {
                    calibrate_threshold(beta).map_err(|e| ScenarioError::Value {
                        key: "beta",
                        message: e.to_string(),
                    })
                })
                .collect::<Result<_, _>>()?,
            (Some(_), Some(_)) => {
                return Err(ScenarioError::Value {
                    key: "A",
                    message: "give exactly one of `A` and `beta`".into(),
                })
            }
            (None, None) => return Err(ScenarioError::Missing("A")),
        };
        if thresholds.is_empty() {
            return Err(ScenarioError::Value {
                key: "A",
                message: "threshold list is empty".into(),
            });
        }

        let paths: usize = parse_num("paths", req("paths")?)?;
        let window = match get("window") {
            None | Some("auto") => WindowPolicy::Auto,
            Some("unbounded") => WindowPolicy::Unbounded,
            Some(w) => WindowPolicy::Fixed(parse_num("window", w)?),
        };
        let sidedness = match get("sidedness") {
            None | Some("increase") | Some("increase-only") => Sidedness::IncreaseOnly,
            Some("two-sided") => Sidedness::TwoSided,
            Some(other) => {
                return Err(ScenarioError::Value {
                    key: "sidedness",
                    message: format!("expected `increase` or `two-sided`, got `{other}`"),
                })
            }
        };
        let k: usize = parse_num("k", req("k")?)?;
        let j_range = match (get("min_j"), get("max_j")) {
            (None, None) => None,
            (lo, hi) => Some((
                lo.map(|s| parse_num("min_j", s)).transpose()?.unwrap_or(0.0),
                hi.map(|s| parse_num("max_j", s)).transpose()?.unwrap_or(f64::INFINITY),
            )),
        };

        let sc = Scenario {
            id: get("id").unwrap_or("scenario").to_string(),
            n: parse_num("n", req("n")?)?,
            p: parse_num("p", req("p")?)?,
            k,
            dof: get("dof").map(|s| parse_num("dof", s)).transpose()?.unwrap_or(k + 2),
            delta: get("delta").map(|s| parse_num("delta", s)).transpose()?.unwrap_or(1),
            gamma: get("gamma").map(|s| parse_num("gamma", s)).transpose()?.unwrap_or(1),
            epsilon: get("epsilon")
                .map(|s| parse_num("epsilon", s))
                .transpose()?
                .unwrap_or(DEFAULT_EPSILON),
            thresholds,
            paths,
            mtfa_paths: get("mtfa_paths")
                .map(|s| parse_num("mtfa_paths", s))
                .transpose()?
                .unwrap_or(3 * paths),
            seed: parse_num("seed", req("seed")?)?,
            horizon: get("horizon")
                .map(|s| parse_num("horizon", s))
                .transpose()?
                .unwrap_or(DEFAULT_HORIZON),
            window,
            sidedness,
            sigma_range: (
                get("sigma_min")
                    .map(|s| parse_num("sigma_min", s))
                    .transpose()?
                    .unwrap_or(0.5),
                get("sigma_max")
                    .map(|s| parse_num("sigma_max", s))
                    .transpose()?
                    .unwrap_or(2.0),
            ),
            mean_scale: get("mean_scale")
                .map(|s| parse_num("mean_scale", s))
                .transpose()?
                .unwrap_or(0.0),
            fast_path_j: get("j").map(|s| parse_num("j", s)).transpose()?,
            j_range,
            pilot_blocks: get("pilot_blocks")
                .map(|s| parse_num("pilot_blocks", s))
                .transpose()?
                .unwrap_or(1000),
            max_redraws: get("max_redraws")
                .map(|s| parse_num("max_redraws", s))
                .transpose()?
                .unwrap_or(1000),
        };
        sc.validate()?;
        Ok(sc)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |key, message: &str| {
            Err(ScenarioError::Value {
                key,
                message: message.to_string(),
            })
        };
        ModelParams::new(self.n, self.p, self.delta)?;
        if self.k == 0 || self.k > self.p {
            return bad("k", "block size must satisfy 1 <= k <= p");
        }
        if self.dof < self.k {
            return bad("dof", "need dof >= k");
        }
        if self.gamma == 0 {
            return bad("gamma", "change point is 1-based");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        if self.paths == 0 || self.mtfa_paths == 0 {
            return bad("paths", "need at least one path");
        }
        if self.horizon < self.gamma {
            return bad("horizon", "must reach the change point");
        }
        if self.window == WindowPolicy::Fixed(0) {
            return bad("window", "must be at least 1");
        }
        if let Some(j) = self.fast_path_j {
            if !(j > 0.0 && j.is_finite()) {
                return bad("j", "must be positive");
            }
        }
        if let Some((lo, hi)) = self.j_range {
            if !(lo <= hi) {
                return bad("min_j", "min_j must not exceed max_j");
            }
        }
        if self.pilot_blocks == 0 || self.max_redraws == 0 {
            return bad("pilot_blocks", "pilot_blocks and max_redraws must be positive");
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.n, self.p, self.delta).expect("validated at parse time")
    }

    pub fn detector_config(&self, threshold: f64) -> Result<GlrConfig, ScenarioError> {
        let cfg = GlrConfig::new(self.epsilon, threshold)?.with_sidedness(self.sidedness);
        let cfg = match self.window {
            WindowPolicy::Auto => cfg,
            WindowPolicy::Fixed(w) => cfg.with_window(Window::Bounded(w))?,
            WindowPolicy::Unbounded => cfg.with_window(Window::Unbounded)?,
        };
        Ok(cfg)
    }
}

/// The realized change model of a scenario.
#[derive(Debug, Clone)]
pub struct Realization {
    pub model: ChangeModel,
    /// Index of the accepted post-change covariance draw.
    pub draw: usize,
    /// Pilot maximum-likelihood estimate of the post-change J.
    pub j_hat: f64,
}

/// MLE of J from `blocks` post-change summaries of one covariance draw.
fn pilot_estimate(sc: &Scenario, model: &ChangeModel, draw: usize) -> Result<f64, ScenarioError> {
    let params = sc.params();
    let post = model.with_gamma(ChangePoint::At(1));
    let stream = PILOT_STREAM_BASE + draw as u64;
    let vs: Vec<f64> = (0..sc.pilot_blocks as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(sc.seed, stream, i);
            summary_statistic(&post.generate_block(1, &mut rng), sc.delta).map(|s| s.v)
        })
        .collect::<Result<_, _>>()?;
    Ok(match mle_j(&vs, &params) {
        Ok(j) => j.value(),
        Err(crate::Error::InfiniteEstimate) => f64::INFINITY,
        Err(e) => return Err(e.into()),
    })
}

/// Draws `Σ₀ = diag(σ_i²)` once and `Σ₁` (redrawing until the pilot
/// estimate lies in `j_range`, when set).
pub fn realize(sc: &Scenario) -> Result<Realization, ScenarioError> {
    let pre = random_diagonal(sc.p, sc.sigma_range.0, sc.sigma_range.1, sc.seed)?;
    let mean = if sc.mean_scale == 0.0 {
        MeanPolicy::Zero
    } else {
        MeanPolicy::Random { scale: sc.mean_scale }
    };
    let draws = if sc.j_range.is_some() { sc.max_redraws } else { 1 };
    for draw in 0..draws {
        let mut rng = stream_rng(sc.seed, WISHART_STREAM, draw as u64);
        let post = sample_wishart_block_cov(sc.p, sc.k, sc.dof, &mut rng)?;
        let model = ChangeModel::new(
            sc.n,
            sc.p,
            ChangePoint::At(sc.gamma),
            pre.clone(),
            post,
            mean.clone(),
            sc.seed,
        )?;
        let j_hat = pilot_estimate(sc, &model, draw)?;
        let accept = sc.j_range.is_none_or(|(lo, hi)| j_hat >= lo && j_hat <= hi);
        if accept {
            return Ok(Realization { model, draw, j_hat });
        }
    }
    let (min, max) = sc.j_range.unwrap_or((0.0, f64::INFINITY));
    Err(ScenarioError::NoAcceptableDraw {
        redraws: draws,
        min,
        max,
    })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub threshold: f64,
    pub delay: McResult,
    pub mtfa: McResult,
    pub j_hat: f64,
}

impl ResultRow {
    pub fn censored_count(&self) -> usize {
        self.delay.censored + self.mtfa.censored
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.scenario_id,
            fmt_f64(self.threshold),
            fmt_f64(self.delay.estimate),
            fmt_f64(self.delay.std_error),
            fmt_f64(self.mtfa.estimate),
            fmt_f64(self.mtfa.std_error),
            fmt_f64(self.j_hat),
            self.censored_count()
        )
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.6}")
    }
}

/// Output of a campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub rows: Vec<ResultRow>,
    /// Settings chosen on the caller's behalf (covariance draw, windows).
    pub metadata: Vec<(String, String)>,
}

impl Campaign {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.to_csv());
        }
        out
    }
}

fn run_rows<S: SummarySource>(
    sc: &Scenario,
    delay_src: &S,
    null_src: &S,
    j_hat: f64,
    metadata: &mut Vec<(String, String)>,
) -> Result<Vec<ResultRow>, ScenarioError> {
    let params = sc.params();
    let mut rows = Vec::with_capacity(sc.thresholds.len());
    for &a in &sc.thresholds {
        let cfg = sc.detector_config(a)?;
        metadata.push((format!("window[A={a}]"), format!("{:?}", cfg.window)));
        let det = GlrDetector::new(cfg, params);
        let delay = run_conditional_delay(delay_src, &det, a, &TrialConfig::new(sc.paths).with_horizon(sc.horizon))?;
        let mtfa = run_mtfa_trial(
            null_src,
            &cfg,
            &params,
            &TrialConfig::new(sc.mtfa_paths).with_horizon(sc.horizon),
        )?;
        rows.push(ResultRow {
            scenario_id: sc.id.clone(),
            threshold: a,
            delay,
            mtfa,
            j_hat,
        });
    }
    Ok(rows)
}

/// Runs delay and false-alarm trials at every threshold.
///
/// With `fast_path`, summaries are drawn from the limiting density with
/// `J = 1` before and `J = j` (or the pilot estimate) after the change.
pub fn run_campaign(sc: &Scenario, fast_path: bool) -> Result<Campaign, ScenarioError> {
    let mut metadata = vec![
        ("wishart_scale".to_string(), "identity".to_string()),
        ("wishart_dof".to_string(), sc.dof.to_string()),
        ("wishart_normalization".to_string(), "1/dof".to_string()),
        (
            "sigma0_range".to_string(),
            format!("[{}, {}]", sc.sigma_range.0, sc.sigma_range.1),
        ),
    ];
    let needs_model = !fast_path || sc.fast_path_j.is_none();
    let realization = if needs_model {
        let r = realize(sc)?;
        metadata.push(("sigma1_draw".to_string(), r.draw.to_string()));
        metadata.push(("pilot_blocks".to_string(), sc.pilot_blocks.to_string()));
        metadata.push(("pilot_j_hat".to_string(), format!("{:.6}", r.j_hat)));
        Some(r)
    } else {
        None
    };

    let rows = if fast_path {
        let post_j = sc
            .fast_path_j
            .or(realization.as_ref().map(|r| r.j_hat))
            .expect("model realized when j is absent");
        let post_j = ShapeParam::new(post_j)?;
        let delay_src = FastPathSource {
            params: sc.params(),
            pre_j: ShapeParam::ONE,
            post_j,
            gamma: ChangePoint::At(sc.gamma),
            seed: sc.seed,
        };
        let null_src = delay_src.with_gamma(ChangePoint::Never);
        run_rows(sc, &delay_src, &null_src, post_j.value(), &mut metadata)?
    } else {
        let r = realization.expect("model realized");
        let delay_src = PipelineSource::new(r.model, sc.delta);
        let null_src = delay_src.with_gamma(ChangePoint::Never);
        run_rows(sc, &delay_src, &null_src, r.j_hat, &mut metadata)?
    };
    Ok(Campaign { rows, metadata })
}
