use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::covariance::{CholeskyFactor, CovarianceSpec};
use super::rng::{stream_rng, SIGMA0_STREAM};
use crate::corrstats::DataBlock;
use crate::error::{invalid, Result};

/// Time of the change, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangePoint {
    At(u64),
    Never,
}

impl ChangePoint {
    /// True when block `m` is drawn from the post-change law.
    pub fn is_post(self, m: u64) -> bool {
        match self {
            Self::At(gamma) => m >= gamma,
            Self::Never => false,
        }
    }
}

/// Row means per block. Correlations do not depend on it.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanPolicy {
    Zero,
    Constant(Vec<f64>),
    /// Fresh `μ_m ~ scale·N(0, I)` for every block.
    Random {
        scale: f64,
    },
}

/// Gaussian change-point scenario: rows are `N(μ_m, Σ₀)` before `γ` and
/// `N(μ_m, Σ₁)` from `γ` on.
#[derive(Debug, Clone)]
pub struct ChangeModel {
    n: usize,
    p: usize,
    gamma: ChangePoint,
    pre: CovarianceSpec,
    post: CovarianceSpec,
    mean: MeanPolicy,
    seed: u64,
    pre_factor: CholeskyFactor,
    post_factor: CholeskyFactor,
}

impl ChangeModel {
    pub fn new(
        n: usize,
        p: usize,
        gamma: ChangePoint,
        pre: CovarianceSpec,
        post: CovarianceSpec,
        mean: MeanPolicy,
        seed: u64,
    ) -> Result<Self> {
        if n < 3 || p < 2 {
            return Err(invalid("n/p", format!("need n >= 3 and p >= 2, got {n}x{p}")));
        }
        if gamma == ChangePoint::At(0) {
            return Err(invalid("gamma", "change point is 1-based"));
        }
        if pre.p() != p || post.p() != p {
            return Err(invalid("covariance", format!("pre/post dimensions must equal p = {p}")));
        }
        if let MeanPolicy::Constant(mu) = &mean {
            if mu.len() != p || mu.iter().any(|x| !x.is_finite()) {
                return Err(invalid("mean", "constant mean must have p finite entries"));
            }
        }
        if let MeanPolicy::Random { scale } = mean {
            if !scale.is_finite() {
                return Err(invalid("mean", "scale must be finite"));
            }
        }
        let pre_factor = pre.cholesky()?;
        let post_factor = post.cholesky()?;
        Ok(Self {
            n,
            p,
            gamma,
            pre,
            post,
            mean,
            seed,
            pre_factor,
            post_factor,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn gamma(&self) -> ChangePoint {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pre(&self) -> &CovarianceSpec {
        &self.pre
    }

    pub fn post(&self) -> &CovarianceSpec {
        &self.post
    }

    pub fn with_gamma(&self, gamma: ChangePoint) -> Self {
        Self { gamma, ..self.clone() }
    }

    /// Block `m` (1-based) drawn from `rng`.
    pub fn generate_block<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> DataBlock {
        let factor = if self.gamma.is_post(m) {
            &self.post_factor
        } else {
            &self.pre_factor
        };
        let mut values = vec![0.0; self.n * self.p];
        let mut z = vec![0.0; self.p];
        for row in values.chunks_exact_mut(self.p) {
            z.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
            factor.apply(&z, row);
        }
        // Means are drawn after the noise so the mean policy never shifts it.
        let mu: Option<Vec<f64>> = match &self.mean {
            MeanPolicy::Zero => None,
            MeanPolicy::Constant(mu) => Some(mu.clone()),
            MeanPolicy::Random { scale } => Some(
                (0..self.p)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        scale * z
                    })
                    .collect(),
            ),
        };
        if let Some(mu) = &mu {
            for row in values.chunks_exact_mut(self.p) {
                row.iter_mut().zip(mu).for_each(|(x, m)| *x += m);
            }
        }
        DataBlock::new(self.n, self.p, values).expect("generated block has valid shape")
    }

    /// Block `m` of Monte Carlo path `path`, from the stream keyed by
    /// `(seed, path, m)`.
    pub fn block_at(&self, path: u64, m: u64) -> DataBlock {
        let mut rng = stream_rng(self.seed, path, m);
        self.generate_block(m, &mut rng)
    }
}

/// Component variances `σ_i² ~ U[lo, hi]`, drawn once per scenario seed.
pub fn random_diagonal(p: usize, lo: f64, hi: f64, seed: u64) -> Result<CovarianceSpec> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(invalid(
            "variance range",
            format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    let mut rng = stream_rng(seed, SIGMA0_STREAM, 0);
    let dist = Uniform::new_inclusive(lo, hi).map_err(|e| invalid("variance range", e.to_string()))?;
    Ok(CovarianceSpec::Diagonal(
        (0..p).map(|_| dist.sample(&mut rng)).collect(),
    ))
}
