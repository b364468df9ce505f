//! Independent reference implementations used as test oracles.
#![allow(dead_code, clippy::excessive_precision, clippy::needless_range_loop)]

use corrqcd::{DataBlock, Sidedness};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`: the
/// interval with the largest error estimate is bisected until the total
/// estimate drops below `tol` or the interval budget runs out.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..20_000 {
        let total_err: f64 = parts.iter().map(|x| x.3).sum();
        let total: f64 = parts.iter().map(|x| x.2).sum();
        if total_err <= tol.max(1e-14 * total.abs()) {
            break;
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].3.partial_cmp(&parts[j].3).unwrap())
            .unwrap();
        let (lo, hi, val, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            parts.push((lo, hi, val, 0.0));
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    let mut vals: Vec<f64> = parts.iter().map(|x| x.2).collect();
    vals.sort_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap());
    vals.iter().sum()
}

/// `∫_0^1 f(ρ) dρ` after `ρ = 1 - t²`, which tames `(1-ρ)^{-1/2}`
/// behaviour at the upper end.
pub fn integrate_unit<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    integrate(|t| if t == 0.0 { 0.0 } else { 2.0 * t * f(1.0 - t * t) }, 0.0, 1.0, tol)
}

/// `∫_ρ^1 (1-u²)^{(n-4)/2} du` by quadrature after `u = 1 - t²`,
/// which removes the endpoint singularity at n = 3.
pub fn t_integral_quad(rho: f64, n: usize) -> f64 {
    let e = (n as f64 - 4.0) / 2.0;
    let upper = (1.0 - rho).sqrt();
    integrate(
        |t| 2.0 * t.powi(n as i32 - 3) * (2.0 - t * t).powf(e),
        0.0,
        upper,
        1e-15,
    )
}

/// Pearson correlation straight from the textbook formula.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn pearson_matrix(block: &DataBlock) -> Vec<Vec<f64>> {
    let p = block.p();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| block.column(j)).collect();
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| if i == j { 1.0 } else { pearson(&cols[i], &cols[j]) })
                .collect()
        })
        .collect()
}

/// Largest off-diagonal |R_ij| by scanning every pair.
pub fn pair_scan_max(r: &[Vec<f64>]) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..r.len() {
        for j in 0..r.len() {
            if i != j {
                best = best.max(r[i][j].abs());
            }
        }
    }
    best
}

/// δ-th largest |R_ij|, j ≠ i, by sorting the whole row.
pub fn sorted_knn(r: &[Vec<f64>], delta: usize, i: usize) -> f64 {
    let mut row: Vec<f64> = (0..r.len()).filter(|&j| j != i).map(|j| r[i][j].abs()).collect();
    row.sort_by(|a, b| b.partial_cmp(a).unwrap());
    row[delta - 1]
}

pub fn sorted_summary(r: &[Vec<f64>], delta: usize) -> f64 {
    (0..r.len()).map(|i| sorted_knn(r, delta, i)).fold(0.0, f64::max)
}

/// Number of columns with at least `delta` neighbours at |R_ij| ≥ ρ.
pub fn brute_hub_count(r: &[Vec<f64>], delta: usize, rho: f64) -> usize {
    let p = r.len();
    let mut hubs = 0;
    for i in 0..p {
        let mut deg = 0;
        for j in 0..p {
            if i != j && r[i][j].abs() >= rho {
                deg += 1;
            }
        }
        if deg >= delta {
            hubs += 1;
        }
    }
    hubs
}

/// Clamped log-likelihood ratio of a segment, evaluated from scratch.
pub fn brute_segment(ws: &[f64], epsilon: f64, sidedness: Sidedness) -> f64 {
    let count = ws.len() as f64;
    let mut sum = 0.0;
    for w in ws {
        sum += w;
    }
    let llr = |j: f64| {
        let mut s = 0.0;
        for w in ws {
            s += j.ln() - (j - 1.0) * w;
        }
        s
    };
    let mut best = if sum == 0.0 {
        1e6
    } else {
        llr((count / sum).max(1.0 + epsilon))
    };
    if sidedness == Sidedness::TwoSided && epsilon < 1.0 {
        best = best.max(llr((count / sum).min(1.0 - epsilon)));
    }
    best
}

/// GLR statistic after every step by a double loop over (m, ℓ).
pub fn brute_glr(ws: &[f64], epsilon: f64, sidedness: Sidedness, window: Option<usize>) -> Vec<f64> {
    (1..=ws.len())
        .map(|m| {
            let first = match window {
                Some(w) => m.saturating_sub(w) + 1,
                None => 1,
            };
            (first..=m)
                .map(|l| brute_segment(&ws[l - 1..m], epsilon, sidedness))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// One-sample Kolmogorov-Smirnov distance.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares line: (slope, intercept, R²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

pub fn gaussian_block<R: Rng>(n: usize, p: usize, rng: &mut R) -> DataBlock {
    let values = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
    DataBlock::new(n, p, values).unwrap()
}

/// Continuous mass of the limiting density by quadrature. The integral is
/// taken in `t` with `ρ = 1 - t²` up to `ρ* = 1 - 2⁻⁴⁸` (exact in binary),
/// and the remaining sliver is added as `1 - cdf(ρ*)`.
pub fn density_mass(params: &corrqcd::ModelParams, j: corrqcd::ShapeParam, tol: f64) -> f64 {
    let t_min = 2f64.powi(-24);
    let body = integrate(
        |t| 2.0 * t * corrqcd::log_pdf_v(1.0 - t * t, params, j).unwrap().exp(),
        t_min,
        1.0,
        tol,
    );
    let rho_star = 1.0 - t_min * t_min;
    body + 1.0 - corrqcd::cdf_v(rho_star, params, j).unwrap()
}
