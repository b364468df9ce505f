use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Row covariance of the generated Gaussian blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    /// `diag(σ_i²)`.
    Diagonal(Vec<f64>),
    /// Identity with the top-left `k × k` block replaced by `block` (row-major).
    BlockWishart {
        p: usize,
        k: usize,
        dof: usize,
        block: Vec<f64>,
    },
    /// Dense symmetric positive-definite matrix, row-major.
    Explicit { p: usize, matrix: Vec<f64> },
}

impl CovarianceSpec {
    pub fn identity(p: usize) -> Self {
        Self::Diagonal(vec![1.0; p])
    }

    pub fn p(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.len(),
            Self::BlockWishart { p, .. } | Self::Explicit { p, .. } => *p,
        }
    }

    /// Dense row-major `p × p` matrix.
    pub fn dense(&self) -> Vec<f64> {
        let p = self.p();
        let mut m = vec![0.0; p * p];
        match self {
            Self::Diagonal(d) => {
                for (i, &v) in d.iter().enumerate() {
                    m[i * p + i] = v;
                }
            }
            Self::BlockWishart { k, block, .. } => {
                for i in 0..p {
                    m[i * p + i] = 1.0;
                }
                for i in 0..*k {
                    for j in 0..*k {
                        m[i * p + j] = block[i * k + j];
                    }
                }
            }
            Self::Explicit { matrix, .. } => m.copy_from_slice(matrix),
        }
        m
    }

    /// Lower Cholesky factor; fails unless the matrix is symmetric positive definite.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        match self {
            Self::Diagonal(d) => {
                if d.is_empty() {
                    return Err(invalid("diag_values", "empty"));
                }
                if let Some((i, &v)) = d.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: v });
                }
                let p = d.len();
                let mut l = vec![0.0; p * p];
                for (i, &v) in d.iter().enumerate() {
                    l[i * p + i] = v.sqrt();
                }
                Ok(CholeskyFactor::from_lower(p, l))
            }
            Self::BlockWishart { p, k, block, .. } => {
                if *k == 0 || k > p || block.len() != k * k {
                    return Err(invalid("block", format!("need a {k}x{k} block with k <= p = {p}")));
                }
                cholesky(*p, &self.dense())
            }
            Self::Explicit { p, matrix } => {
                if matrix.len() != p * p {
                    return Err(invalid("matrix", format!("expected {p}x{p} entries")));
                }
                for i in 0..*p {
                    for j in 0..i {
                        if matrix[i * p + j] != matrix[j * p + i] {
                            return Err(invalid("matrix", format!("not symmetric at ({i}, {j})")));
                        }
                    }
                }
                cholesky(*p, matrix)
            }
        }
    }
}

/// Lower-triangular factor `L` with `LLᵀ = Σ`, plus the first nonzero column
/// of each row so sparse structure (diagonal, single block) is skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    p: usize,
    lower: Vec<f64>,
    row_start: Vec<usize>,
}

impl CholeskyFactor {
    fn from_lower(p: usize, lower: Vec<f64>) -> Self {
        let row_start = (0..p)
            .map(|i| (0..=i).find(|&j| lower[i * p + j] != 0.0).unwrap_or(i))
            .collect();
        Self { p, lower, row_start }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// `out = L·z`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let p = self.p;
        for i in 0..p {
            let row = &self.lower[i * p..i * p + i + 1];
            let s = self.row_start[i];
            out[i] = row[s..].iter().zip(&z[s..=i]).fold(0.0, |acc, (a, b)| acc + a * b);
        }
    }
}

/// Dense Cholesky–Banachiewicz factorization of a row-major SPD matrix.
pub fn cholesky(p: usize, a: &[f64]) -> Result<CholeskyFactor> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(sum > 0.0 && sum.is_finite()) {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: sum });
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    Ok(CholeskyFactor::from_lower(p, l))
}

/// `W ~ Wishart(I_k, dof)` by the Bartlett decomposition `W = A·Aᵀ`, with
/// `A` lower triangular, `A_ii² ~ χ²(dof - i)` and `A_ij ~ N(0, 1)` below
/// the diagonal.
pub fn bartlett_wishart<R: Rng + ?Sized>(k: usize, dof: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(invalid("k", "block size must be positive"));
    }
    if dof < k {
        return Err(invalid("dof", format!("need dof >= k = {k}, got {dof}")));
    }
    let mut a = vec![0.0; k * k];
    for i in 0..k {
        let chi = ChiSquared::new((dof - i) as f64).map_err(|e| invalid("dof", e.to_string()))?;
        a[i * k + i] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[i * k + j] = StandardNormal.sample(rng);
        }
    }
    let mut w = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..=j).map(|t| a[i * k + t] * a[j * k + t]).sum();
            w[i * k + j] = s;
            w[j * k + i] = s;
        }
    }
    Ok(w)
}

/// `Σ₁ = I_p` with the top-left block replaced by `W/dof`, `W ~ Wishart(I_k, dof)`.
pub fn sample_wishart_block_cov<R: Rng + ?Sized>(
    p: usize,
    k: usize,
    dof: usize,
    rng: &mut R,
) -> Result<CovarianceSpec> {
    if k > p {
        return Err(invalid("k", format!("block size {k} exceeds p = {p}")));
    }
    let mut block = bartlett_wishart(k, dof, rng)?;
    let scale = 1.0 / dof as f64;
    block.iter_mut().for_each(|x| *x *= scale);
    Ok(CovarianceSpec::BlockWishart { p, k, dof, block })
}
