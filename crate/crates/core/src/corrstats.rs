//! Sample correlation matrices and the k-NN correlation summary statistic.
//!
//! A data block is an `n × p` matrix whose rows are i.i.d. samples of a
//! p-vector. The summary statistic `V_δ` is the largest, over columns, of the
//! δ-th largest absolute correlation between that column and the others.
//! `V_δ ≥ ρ` holds exactly when the thresholded correlation graph at level ρ
//! has at least one vertex of degree ≥ δ.

use crate::error::{invalid, Error, Result};

/// One `n × p` observation matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl DataBlock {
    /// Builds a block from row-major values. Requires `n ≥ 3`, `p ≥ 2` and
    /// finite entries.
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return Err(invalid("n", format!("need at least 3 rows, got {n}")));
        }
        if p < 2 {
            return Err(invalid("p", format!("need at least 2 columns, got {p}")));
        }
        if values.len() != n * p {
            return Err(invalid(
                "values",
                format!("expected {} entries for {n}x{p}, got {}", n * p, values.len()),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / p,
                column: pos % p,
            });
        }
        Ok(Self { n, p, values })
    }

    /// Builds a block from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(invalid(
                "rows",
                format!("row {bad} has {} values, expected {p}", rows[bad].len()),
            ));
        }
        Self::new(n, p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, column: usize) -> f64 {
        self.values[row * self.p + column]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.p..(row + 1) * self.p]
    }

    pub fn column(&self, column: usize) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, column)).collect()
    }
}

/// Symmetric `p × p` sample correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    p: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    /// Wraps an existing matrix, checking symmetry, unit diagonal and range.
    pub fn from_entries(p: usize, entries: Vec<f64>) -> Result<Self> {
        if p < 2 || entries.len() != p * p {
            return Err(invalid("entries", format!("expected a {p}x{p} matrix with p >= 2")));
        }
        for i in 0..p {
            if (entries[i * p + i] - 1.0).abs() > 1e-12 {
                return Err(invalid("entries", format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let (a, b) = (entries[i * p + j], entries[j * p + i]);
                if a != b {
                    return Err(invalid("entries", format!("not symmetric at ({i}, {j})")));
                }
                if !a.is_finite() || a.abs() > 1.0 + 1e-12 {
                    return Err(invalid("entries", format!("|R[{i},{j}]| exceeds 1")));
                }
            }
        }
        Ok(Self { p, entries })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.p..(i + 1) * self.p]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Largest off-diagonal magnitude, i.e. the δ = 1 summary statistic.
    pub fn max_off_diagonal(&self) -> f64 {
        let mut best = 0.0_f64;
        for i in 0..self.p {
            for &r in &self.row(i)[i + 1..] {
                best = best.max(r.abs());
            }
        }
        best
    }
}

/// Vertex degrees and hub count of the correlation graph at threshold ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    pub rho: f64,
    pub delta: usize,
    pub degrees: Vec<usize>,
    pub hub_count: usize,
}

/// The summary statistic `V_δ` of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryValue {
    pub v: f64,
    pub delta: usize,
}

impl SummaryValue {
    pub fn new(v: f64, delta: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain {
                what: "summary value",
                value: v,
                domain: "[0, 1]",
            });
        }
        if delta == 0 {
            return Err(invalid("delta", "must be positive"));
        }
        Ok(Self { v, delta })
    }
}

/// Pearson correlation matrix of the block's columns.
///
/// Columns are centered once and scaled to unit norm; `R_ij` is then the
/// inner product of normalized columns i and j, summed in row order.
pub fn sample_correlation(block: &DataBlock) -> Result<CorrelationMatrix> {
    let (n, p) = (block.n, block.p);
    // Column-major normalized copy.
    let mut cols = vec![0.0; n * p];
    for j in 0..p {
        let col = &mut cols[j * n..(j + 1) * n];
        let mut scale = 0.0_f64;
        for (r, c) in col.iter_mut().enumerate() {
            *c = block.get(r, j);
            scale = scale.max(c.abs());
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        // second pass corrects rounding in the mean
        let resid = col.iter().map(|x| x - mean).sum::<f64>() / n as f64;
        let mean = mean + resid;
        let mut ss = 0.0;
        for c in col.iter_mut() {
            *c -= mean;
            ss += *c * *c;
        }
        let floor = 1e-14 * scale;
        if scale == 0.0 || ss <= n as f64 * floor * floor {
            return Err(Error::ZeroVariance { column: j });
        }
        let inv = 1.0 / ss.sqrt();
        col.iter_mut().for_each(|c| *c *= inv);
    }

    let mut entries = vec![0.0; p * p];
    for i in 0..p {
        entries[i * p + i] = 1.0;
        let ci = &cols[i * n..(i + 1) * n];
        for j in (i + 1)..p {
            let cj = &cols[j * n..(j + 1) * n];
            let r = ci.iter().zip(cj).fold(0.0, |acc, (a, b)| acc + a * b).clamp(-1.0, 1.0);
            entries[i * p + j] = r;
            entries[j * p + i] = r;
        }
    }
    Ok(CorrelationMatrix { p, entries })
}

fn check_delta(delta: usize, p: usize) -> Result<()> {
    if delta == 0 || delta > p - 1 {
        return Err(invalid(
            "delta",
            format!("must satisfy 1 <= delta <= p - 1 = {}, got {delta}", p - 1),
        ));
    }
    Ok(())
}

/// The k-th largest `|R_ij|` over `j ≠ i` (k is 1-based, column index 0-based).
pub fn knn_corr_distance(r: &CorrelationMatrix, k: usize, i: usize) -> Result<f64> {
    check_delta(k, r.p).map_err(|_| invalid("k", format!("must satisfy 1 <= k <= p - 1 = {}, got {k}", r.p - 1)))?;
    if i >= r.p {
        return Err(invalid("i", format!("column {i} out of range for p = {}", r.p)));
    }
    let mut mags: Vec<f64> = r
        .row(i)
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, x)| x.abs())
        .collect();
    Ok(kth_largest(&mut mags, k))
}

/// Partial selection of the k-th largest value (k is 1-based).
fn kth_largest(values: &mut [f64], k: usize) -> f64 {
    let (_, kth, _) = values.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *kth
}

/// `V_δ` computed from an existing correlation matrix.
pub fn summary_from_correlation(r: &CorrelationMatrix, delta: usize) -> Result<SummaryValue> {
    check_delta(delta, r.p)?;
    let v = if delta == 1 {
        r.max_off_diagonal()
    } else {
        let mut scratch = Vec::with_capacity(r.p - 1);
        let mut best = 0.0_f64;
        for i in 0..r.p {
            scratch.clear();
            scratch.extend(
                r.row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, x)| x.abs()),
            );
            best = best.max(kth_largest(&mut scratch, delta));
        }
        best
    };
    Ok(SummaryValue { v, delta })
}

/// `V_δ(X) = max_i d_NN^(δ)(i)`.
pub fn summary_statistic(block: &DataBlock, delta: usize) -> Result<SummaryValue> {
    check_delta(delta, block.p)?;
    let r = sample_correlation(block)?;
    summary_from_correlation(&r, delta)
}

/// Degrees of the correlation graph (edges where `|R_ij| ≥ ρ`) and the number
/// of vertices with degree at least δ.
pub fn degree_profile(r: &CorrelationMatrix, delta: usize, rho: f64) -> Result<DegreeProfile> {
    check_delta(delta, r.p)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain {
            what: "degree_profile threshold",
            value: rho,
            domain: "[0, 1]",
        });
    }
    let degrees: Vec<usize> = (0..r.p)
        .map(|i| {
            r.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, x)| j != i && x.abs() >= rho)
                .count()
        })
        .collect();
    let hub_count = degrees.iter().filter(|&&d| d >= delta).count();
    Ok(DegreeProfile {
        rho,
        delta,
        degrees,
        hub_count,
    })
}
