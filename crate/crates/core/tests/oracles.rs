#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use corrqcd::simgen::stream_rng;
use corrqcd::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_GRID: [usize; 10] = [3, 4, 5, 6, 7, 10, 15, 20, 30, 50];

fn rho_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
    g.extend([0.99, 0.999, 1.0]);
    g
}

#[test]
fn t_integral_matches_quadrature() {
    for &n in &N_GRID {
        for rho in rho_grid() {
            let got = t_integral(rho, n).unwrap();
            let want = t_integral_quad(rho, n);
            assert!((got - want).abs() < 1e-10, "n={n} rho={rho}: {got} vs {want}");
        }
    }
    let got = t_integral(0.5, 10).unwrap();
    assert!((got - t_integral_quad(0.5, 10)).abs() < 1e-12);
}

#[test]
fn pearson_three_by_two() {
    let block = DataBlock::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 4.0]]).unwrap();
    let r = sample_correlation(&block).unwrap();
    let want = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]);
    assert!((r.get(0, 1) - want).abs() < 1e-12);
    assert!((r.get(1, 0) - want).abs() < 1e-12);
}

#[test]
fn correlation_matches_pearson_on_random_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.random_range(3..12);
        let p = rng.random_range(2..9);
        let block = gaussian_block(n, p, &mut rng);
        let r = sample_correlation(&block).unwrap();
        let oracle = pearson_matrix(&block);
        for i in 0..p {
            for j in 0..p {
                assert!((r.get(i, j) - oracle[i][j]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn knn_matches_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let block = gaussian_block(8, 6, &mut rng);
    let r = sample_correlation(&block).unwrap();
    let oracle = pearson_matrix(&block);
    for i in 0..6 {
        for k in 1..6 {
            let got = knn_corr_distance(&r, k, i).unwrap();
            assert!((got - sorted_knn(&oracle, k, i)).abs() < 1e-12);
        }
    }
}

#[test]
fn summary_matches_pair_scan_and_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let block = gaussian_block(4, 5, &mut rng);
        let oracle = pearson_matrix(&block);
        let v1 = summary_statistic(&block, 1).unwrap().v;
        let v2 = summary_statistic(&block, 2).unwrap().v;
        assert!((v1 - pair_scan_max(&oracle)).abs() < 1e-12);
        assert!((v2 - sorted_summary(&oracle, 2)).abs() < 1e-12);
    }
}

#[test]
fn degree_profile_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let block = gaussian_block(6, 5, &mut rng);
        let r = sample_correlation(&block).unwrap();
        let oracle = pearson_matrix(&block);
        let prof = degree_profile(&r, 2, 0.5).unwrap();
        assert_eq!(prof.hub_count, brute_hub_count(&oracle, 2, 0.5));
    }
}

#[test]
fn lambda_two_formulas_agree() {
    let params = ModelParams::new(10, 100, 1).unwrap();
    let factored = lambda_of_rho(0.9, &params).unwrap();
    let unfactored = 100.0 * 99.0 * p0(0.9, 10).unwrap();
    assert!(((factored - unfactored) / unfactored).abs() < 1e-10);
    let params = ModelParams::new(10, 100, 3).unwrap();
    let factored = lambda_of_rho(0.7, &params).unwrap();
    let binom = 99.0 * 98.0 * 97.0 / 6.0;
    let unfactored = 100.0 * binom * p0(0.7, 10).unwrap().powi(3);
    assert!(((factored - unfactored) / unfactored).abs() < 1e-10);
}

#[test]
fn density_integrates_to_one_minus_atom() {
    for &(n, p, delta) in &[(10, 100, 1), (10, 100, 2), (4, 50, 1), (3, 20, 1), (6, 30, 3)] {
        let params = ModelParams::new(n, p, delta).unwrap();
        for &j in &[1.0, 2.9] {
            let j = ShapeParam::new(j).unwrap();
            let mass = density_mass(&params, j, 1e-12);
            let atom = cdf_v(0.0, &params, j).unwrap();
            assert!(
                (mass + atom - 1.0).abs() < 1e-8,
                "({n},{p},{delta}) mass {mass} atom {atom}"
            );
        }
    }
}

#[test]
fn kl_closed_form_matches_quadrature() {
    let params = ModelParams::new(10, 100, 1).unwrap();
    for &j in &[1.73, 2.9, 9.45, 16.54, 0.4] {
        let jj = ShapeParam::new(j).unwrap();
        let integrand = |r: f64| {
            let lj = log_pdf_v(r, &params, jj).unwrap();
            let l1 = log_pdf_v(r, &params, ShapeParam::ONE).unwrap();
            if lj == f64::NEG_INFINITY {
                0.0
            } else {
                lj.exp() * (lj - l1)
            }
        };
        let quad = integrate_unit(integrand, 1e-12);
        assert!((quad - kl_divergence(jj)).abs() < 1e-4, "J={j}: {quad}");
    }
}

#[test]
fn log_ratio_is_linear_in_w() {
    let params = ModelParams::new(10, 100, 1).unwrap();
    let j = ShapeParam::new(4.2).unwrap();
    for &rho in &[0.6, 0.85, 0.93, 0.99] {
        let lhs = log_pdf_v(rho, &params, j).unwrap() - log_pdf_v(rho, &params, ShapeParam::ONE).unwrap();
        let rhs = 4.2f64.ln() - params.c() / 2.0 * t_integral(rho, 10).unwrap() * 3.2;
        assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
    }
}

fn random_w_stream(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = rng.random_range(1..=200);
    let rate: f64 = rng.random_range(0.3..6.0);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.02) {
                0.0
            } else {
                -rng.random::<f64>().ln() / rate
            }
        })
        .collect()
}

#[test]
fn windowed_glr_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let ws = random_w_stream(&mut rng);
        let (eps, side) = if case % 3 == 0 {
            (0.5, Sidedness::TwoSided)
        } else {
            (1.5, Sidedness::IncreaseOnly)
        };
        for window in [None, Some(1), Some(7), Some(40)] {
            let config = GlrConfig::new(eps, f64::INFINITY)
                .unwrap()
                .with_window(window.map_or(Window::Unbounded, Window::Bounded))
                .unwrap()
                .with_sidedness(side);
            let oracle = brute_glr(&ws, eps, side, window);
            let mut state = DetectorState::new();
            for (m, &w) in ws.iter().enumerate() {
                state.step_w(w, &config).unwrap();
                let got = state.current_stat();
                assert!(
                    (got - oracle[m]).abs() <= 1e-10 * oracle[m].abs().max(1.0),
                    "case {case} window {window:?} m {}: {got} vs {}",
                    m + 1,
                    oracle[m]
                );
                let buf: Vec<f64> = state.w_buffer().iter().copied().collect();
                let recomputed = brute_glr(&buf, eps, side, None).last().copied().unwrap();
                assert!((got - recomputed).abs() <= 1e-10 * got.abs().max(1.0));
            }
        }
    }
}

#[test]
fn segment_score_at_interior_mle_is_kl() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let len = rng.random_range(1..30);
        let ws: Vec<f64> = (0..len).map(|_| rng.random_range(0.001..0.4)).collect();
        let sum: f64 = ws.iter().sum();
        let j_hat = len as f64 / sum;
        if j_hat < 2.5 {
            continue;
        }
        let s = segment_score(&ws, 1.5, Sidedness::IncreaseOnly).unwrap();
        let want = len as f64 * kl_divergence(ShapeParam::new(j_hat).unwrap());
        assert!((s.score - want).abs() < 1e-10 * want.max(1.0));
        assert!(s.score >= 0.0);
    }
}

#[test]
fn verdict_matches_argmax_segment() {
    let params = ModelParams::new(10, 100, 1).unwrap();
    let config = GlrConfig::new(1.5, 5.0).unwrap();
    let mut det = GlrDetector::new(config, params);
    let null: Vec<f64> = (0..30)
        .map(|m| sample_v(&params, ShapeParam::ONE, &mut stream_rng(8, 0, m)))
        .collect();
    let post: Vec<f64> = (0..60)
        .map(|m| sample_v(&params, ShapeParam::new(9.0).unwrap(), &mut stream_rng(8, 1, m)))
        .collect();
    let stream: Vec<f64> = null.iter().chain(&post).copied().collect();
    let mut ws = Vec::new();
    for &v in &stream {
        ws.push(w_transform(v, &params).unwrap());
        if det.push(v).unwrap().stopped {
            break;
        }
    }
    let verdict = det.state().verdict().unwrap();
    let tau = verdict.stopping_time as usize;
    assert_eq!(tau, ws.len());
    let ell = verdict.change_point_estimate as usize;
    let seg = &ws[ell - 1..tau];
    let s = segment_score(seg, 1.5, Sidedness::IncreaseOnly).unwrap();
    assert!((s.j_hat - verdict.j_estimate).abs() < 1e-12 * s.j_hat);
    let best = brute_glr(&ws, 1.5, Sidedness::IncreaseOnly, Some(config_window(&config)));
    assert!((best[tau - 1] - s.score).abs() < 1e-10 * s.score.abs().max(1.0));
    assert!(s.score > 5.0);
}

fn config_window(config: &GlrConfig) -> usize {
    match config.window {
        Window::Bounded(w) => w,
        Window::Unbounded => usize::MAX,
    }
}

#[test]
fn sampled_v_follows_cdf() {
    let params = ModelParams::new(10, 100, 1).unwrap();
    for &j in &[1.0, 2.9, 9.45] {
        let jj = ShapeParam::new(j).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let vs: Vec<f64> = (0..100_000).map(|_| sample_v(&params, jj, &mut rng)).collect();
        let d = ks_distance(&vs, |r| cdf_v(r, &params, jj).unwrap());
        assert!(d < 0.006, "J={j}: KS {d}");
        let ws: Vec<f64> = vs.iter().map(|&v| w_transform(v, &params).unwrap()).collect();
        let (mean, se) = mean_and_se(&ws);
        assert!((mean - 1.0 / j).abs() < 3.0 * se, "J={j}: mean W {mean} se {se}");
    }
}

#[test]
fn mle_is_consistent() {
    let params = ModelParams::new(10, 100, 1).unwrap();
    let j = ShapeParam::new(2.9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vs: Vec<f64> = (0..10_000).map(|_| sample_v(&params, j, &mut rng)).collect();
    let est = mle_j(&vs, &params).unwrap().value();
    assert!((est - 2.9).abs() < 0.05 * 2.9, "{est}");
}

#[test]
fn mean_log_ratio_converges_to_kl() {
    let params = ModelParams::new(10, 100, 1).unwrap();
    let j = 2.9;
    let jj = ShapeParam::new(j).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let lr: Vec<f64> = (0..100_000)
        .map(|_| {
            let w = w_transform(sample_v(&params, jj, &mut rng), &params).unwrap();
            j.ln() - (j - 1.0) * w
        })
        .collect();
    let (mean, se) = mean_and_se(&lr);
    assert!((mean - kl_divergence(jj)).abs() < 3.0 * se, "{mean} ± {se}");
}
