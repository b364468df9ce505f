//! Limiting law of the summary statistic `V_δ` for `p ≫ n`.
//!
//! With `T(ρ) = ∫_ρ^1 (1-u²)^{(n-4)/2} du` and `C = p·binom(p-1, δ)·a_n^δ`,
//!
//! ```text
//! P(V ≤ ρ) = exp(-C·T(ρ)^δ·J/φ(δ)),   φ(1) = 2, φ(δ) = 1 otherwise
//! ```
//!
//! so `W = C·T(V)^δ/φ(δ)` is exponential with rate `J` (truncated at
//! `W(0)`, which carries the atom `P(V = 0)`). Every quantity that depends
//! on `C` is carried in log space.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::special::{ln_beta, ln_beta_inc_reg_upper, ln_binomial};

/// Fixed constants of the density family for given `(n, p, δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    n: usize,
    p: usize,
    delta: usize,
    ln_a_n: f64,
    ln_c: f64,
    ln_t0: f64,
    phi: u32,
}

impl ModelParams {
    pub fn new(n: usize, p: usize, delta: usize) -> Result<Self> {
        check_n(n)?;
        if p < 2 {
            return Err(invalid("p", format!("need p >= 2, got {p}")));
        }
        if delta == 0 || delta > p - 1 {
            return Err(invalid(
                "delta",
                format!("must satisfy 1 <= delta <= p - 1 = {}, got {delta}", p - 1),
            ));
        }
        let ln_a_n = ln_a_n(n);
        let ln_c = (p as f64).ln() + ln_binomial(p as u64 - 1, delta as u64) + delta as f64 * ln_a_n;
        Ok(Self {
            n,
            p,
            delta,
            ln_a_n,
            ln_c,
            ln_t0: ln_t_integral(0.0, n),
            phi: if delta == 1 { 2 } else { 1 },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn phi(&self) -> u32 {
        self.phi
    }

    pub fn a_n(&self) -> f64 {
        self.ln_a_n.exp()
    }

    pub fn ln_a_n(&self) -> f64 {
        self.ln_a_n
    }

    /// `C_{p,n,δ}`; may be `inf` for huge `p`, use [`ModelParams::ln_c`] then.
    pub fn c(&self) -> f64 {
        self.ln_c.exp()
    }

    pub fn ln_c(&self) -> f64 {
        self.ln_c
    }

    /// Largest attainable transformed statistic, `W(0) = Λ(0)/φ(δ)`.
    pub fn w_max(&self) -> f64 {
        (self.ln_c + self.delta as f64 * self.ln_t0 - (self.phi as f64).ln()).exp()
    }
}

/// Positive exponential-family parameter `J`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ShapeParam(f64);

impl ShapeParam {
    pub fn new(j: f64) -> Result<Self> {
        if !(j.is_finite() && j > 0.0) {
            return Err(invalid("J", format!("must be positive and finite, got {j}")));
        }
        Ok(Self(j))
    }

    /// Pre-change value under diagonal dispersion.
    pub const ONE: ShapeParam = ShapeParam(1.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 3 {
        return Err(invalid("n", format!("need n >= 3, got {n}")));
    }
    Ok(())
}

fn check_rho(rho: f64, what: &'static str) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain {
            what,
            value: rho,
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// `ln a_n` with `a_n = 2 / B((n-2)/2, 1/2)`, the normalizer that makes
/// `P_0(ρ) = a_n·T(ρ)` the null probability `P(|R_12| ≥ ρ)`.
fn ln_a_n(n: usize) -> f64 {
    std::f64::consts::LN_2 - ln_beta((n as f64 - 2.0) / 2.0, 0.5)
}

/// `a_n = 2 / B((n-2)/2, 1/2)`.
pub fn a_n(n: usize) -> Result<f64> {
    check_n(n)?;
    Ok(ln_a_n(n).exp())
}

/// `ln T(ρ)` via `T(ρ) = ½·B(½, (n-2)/2)·(1 - I_{ρ²}(½, (n-2)/2))`.
fn ln_t_integral(rho: f64, n: usize) -> f64 {
    let a = 0.5;
    let b = (n as f64 - 2.0) / 2.0;
    let x = rho * rho;
    let one_minus_x = (1.0 - rho) * (1.0 + rho);
    -std::f64::consts::LN_2 + ln_beta(a, b) + ln_beta_inc_reg_upper(a, b, x, one_minus_x)
}

/// `T(ρ) = ∫_ρ^1 (1-u²)^{(n-4)/2} du`.
pub fn t_integral(rho: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    check_rho(rho, "t_integral")?;
    Ok(ln_t_integral(rho, n).exp())
}

/// Inverse of `T`: the unique ρ in [0, 1] with `T(ρ) = w`.
pub fn t_inverse(w: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    let t0 = ln_t_integral(0.0, n).exp();
    // T(0) carries rounding error; accept values within it.
    let w = if w > t0 && w <= t0 * (1.0 + 1e-12) { t0 } else { w };
    if !(0.0..=t0).contains(&w) {
        return Err(Error::Domain {
            what: "t_inverse",
            value: w,
            domain: "[0, T(0)]",
        });
    }
    if w == 0.0 {
        return Ok(1.0);
    }
    Ok(t_inverse_ln(w.ln(), n))
}

/// Solves `ln T(ρ) = target` by Newton's method safeguarded with bisection.
fn t_inverse_ln(target: f64, n: usize) -> f64 {
    let ln_t0 = ln_t_integral(0.0, n);
    if target >= ln_t0 {
        return 0.0;
    }
    if target == f64::NEG_INFINITY {
        return 1.0;
    }
    let expo = (n as f64 - 4.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // Start from the small-(1-ρ) asymptote T ≈ 2^{(n-4)/2}·(1-ρ)^{(n-2)/2}/((n-2)/2).
    let k = (n as f64 - 2.0) / 2.0;
    let guess = 1.0 - ((target + k.ln() - expo * std::f64::consts::LN_2) / k).exp();
    let mut rho = if guess.is_finite() && guess > 0.0 && guess < 1.0 {
        guess
    } else {
        0.5
    };
    for _ in 0..200 {
        let f = ln_t_integral(rho, n) - target;
        if f == 0.0 {
            return rho;
        }
        // ln T is decreasing in ρ
        if f > 0.0 {
            lo = rho;
        } else {
            hi = rho;
        }
        if hi - lo <= 1e-15 {
            break;
        }
        let ln_t = f + target;
        let one_minus_sq = (1.0 - rho) * (1.0 + rho);
        let dlnt = -(expo * one_minus_sq.ln() - ln_t).exp();
        let newton = rho - f / dlnt;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - rho).abs() <= 1e-15 * rho.max(1e-300) {
            rho = next;
            break;
        }
        rho = next;
    }
    rho
}

/// `P_0(ρ) = a_n·T(ρ)`.
pub fn p0(rho: f64, n: usize) -> Result<f64> {
    Ok(a_n(n)? * t_integral(rho, n)?)
}

/// `Λ(ρ) = C·T(ρ)^δ`, evaluated in log space.
pub fn lambda_of_rho(rho: f64, params: &ModelParams) -> Result<f64> {
    check_rho(rho, "lambda_of_rho")?;
    Ok(ln_lambda(rho, params).exp())
}

fn ln_lambda(rho: f64, params: &ModelParams) -> f64 {
    params.ln_c + params.delta as f64 * ln_t_integral(rho, params.n)
}

/// `W = Λ(ρ)/φ(δ)`; exponential with rate `J` when `V ~ f_V(·; J)`.
pub fn w_transform(rho: f64, params: &ModelParams) -> Result<f64> {
    check_rho(rho, "w_transform")?;
    Ok(w_unchecked(rho, params))
}

pub(crate) fn w_unchecked(rho: f64, params: &ModelParams) -> f64 {
    (ln_lambda(rho, params) - (params.phi as f64).ln()).exp()
}

/// Maps a transformed value back to ρ; values at or past `W(0)` give the atom 0.
pub fn w_inverse(w: f64, params: &ModelParams) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::Domain {
            what: "w_inverse",
            value: w,
            domain: "[0, inf)",
        });
    }
    if w == 0.0 {
        return Ok(1.0);
    }
    let ln_t = ((params.phi as f64).ln() + w.ln() - params.ln_c) / params.delta as f64;
    Ok(t_inverse_ln(ln_t, params.n))
}

/// `P(V ≤ ρ) = exp(-Λ(ρ)·J/φ(δ))`.
pub fn cdf_v(rho: f64, params: &ModelParams, j: ShapeParam) -> Result<f64> {
    check_rho(rho, "cdf_v")?;
    Ok((-j.0 * w_unchecked(rho, params)).exp())
}

/// Log density of the continuous component on (0, 1].
pub fn log_pdf_v(rho: f64, params: &ModelParams, j: ShapeParam) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain {
            what: "log_pdf_v",
            value: rho,
            domain: "(0, 1]",
        });
    }
    let n = params.n;
    if rho == 1.0 && n <= 3 {
        return Err(Error::DivergentDensity { n });
    }
    let delta = params.delta as f64;
    let ln_t = ln_t_integral(rho, n);
    let t_term = if params.delta == 1 { 0.0 } else { (delta - 1.0) * ln_t };
    let expo = (n as f64 - 4.0) / 2.0;
    let shape_term = if n == 4 {
        0.0
    } else {
        expo * ((1.0 - rho) * (1.0 + rho)).ln()
    };
    let w = (params.ln_c + delta * ln_t - (params.phi as f64).ln()).exp();
    Ok(params.ln_c + delta.ln() - (params.phi as f64).ln() + t_term + shape_term + j.0.ln() - j.0 * w)
}

/// Draws V by inverse transform: `E ~ Exp(J)`, then `W⁻¹(E)` (0 when `E`
/// exceeds `W(0)`).
pub fn sample_v<R: Rng + ?Sized>(params: &ModelParams, j: ShapeParam, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    let e = e / j.0;
    let ln_t = ((params.phi as f64).ln() + e.ln() - params.ln_c) / params.delta as f64;
    if ln_t >= params.ln_t0 {
        return 0.0;
    }
    t_inverse_ln(ln_t, params.n)
}

/// Rate MLE of `J` from summary values: `Ĵ = m / Σ W(V_i)`.
pub fn mle_j(samples: &[f64], params: &ModelParams) -> Result<ShapeParam> {
    if samples.is_empty() {
        return Err(invalid("samples", "need at least one sample"));
    }
    let mut sum = 0.0;
    for &v in samples {
        sum += w_transform(v, params)?;
    }
    if sum == 0.0 {
        return Err(Error::InfiniteEstimate);
    }
    ShapeParam::new(samples.len() as f64 / sum)
}

/// Kullback–Leibler divergence `I(J) = log J + 1/J - 1` between `f_V(·; J)`
/// and `f_V(·; 1)`.
pub fn kl_divergence(j: ShapeParam) -> f64 {
    let j = j.0;
    j.ln() + 1.0 / j - 1.0
}
