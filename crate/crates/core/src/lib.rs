//! Quickest detection of a change in the dispersion structure of a stream of
//! `n × p` data matrices.
//!
//! Each matrix is reduced to the k-NN correlation summary `V_δ`
//! ([`corrstats`]), whose large-`p` law is a one-parameter exponential family
//! in `J` ([`vdensity`]). A clamped-GLR stopping rule on the summary stream
//! ([`qcd`]) detects departures from the pre-change value `J = 1`;
//! [`simgen`] generates Gaussian change-point scenarios and estimates delay
//! and mean time to false alarm by Monte Carlo.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrstats;
pub mod error;
pub mod qcd;
pub mod simgen;
pub mod special;
pub mod stream;
pub mod vdensity;

pub use corrstats::{
    degree_profile, knn_corr_distance, sample_correlation, summary_from_correlation, summary_statistic,
    CorrelationMatrix, DataBlock, DegreeProfile, SummaryValue,
};
pub use error::{Error, Result};
pub use qcd::{
    calibrate_threshold, cusum_known_j, default_window, glr_step, segment_score, CusumDetector, DetectorState,
    GlrConfig, GlrDetector, SegmentScore, Sidedness, StepReport, StoppingRule, Verdict, Window,
};
pub use vdensity::{
    a_n, cdf_v, kl_divergence, lambda_of_rho, log_pdf_v, mle_j, p0, sample_v, t_integral, t_inverse, w_inverse,
    w_transform, ModelParams, ShapeParam,
};
