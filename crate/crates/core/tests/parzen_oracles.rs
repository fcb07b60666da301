use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use studyforge::sampler::parzen::{Component, ParzenEstimator};
use studyforge::sampler::{fit_parzen, TpeConfig};

/// Closed-form truncated normal density on `[a, b]`.
fn truncnorm_pdf(x: f64, mu: f64, sigma: f64, a: f64, b: f64) -> f64 {
    let n = Normal::new(mu, sigma).unwrap();
    n.pdf(x) / (n.cdf(b) - n.cdf(a))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn pdf(est: &ParzenEstimator, x: f64) -> f64 {
    est.log_pdf(x).unwrap().exp()
}

#[test]
fn single_component_matches_truncated_normal() {
    let est = ParzenEstimator::from_components(
        vec![Component {
            center: 0.2,
            bandwidth: 0.3,
            weight: 1.0,
        }],
        0.0,
        1.0,
        false,
    );
    for x in [0.0, 0.1, 0.2, 0.55, 0.9, 1.0] {
        let want = truncnorm_pdf(x, 0.2, 0.3, 0.0, 1.0);
        assert!((pdf(&est, x) - want).abs() < 1e-12 * want.max(1.0), "x={x}");
    }
}

#[test]
fn one_observation_fit_is_documented_mixture() {
    // Observation bandwidth width/2, prior centered with bandwidth = width.
    let est = fit_parzen(&[0.3], (0.0, 1.0), false, &TpeConfig::default()).unwrap();
    for x in [0.0, 0.25, 0.3, 0.8, 1.0] {
        let want =
            0.5 * truncnorm_pdf(x, 0.3, 0.5, 0.0, 1.0) + 0.5 * truncnorm_pdf(x, 0.5, 1.0, 0.0, 1.0);
        assert!((pdf(&est, x) - want).abs() < 1e-12, "x={x}");
    }
}

#[test]
fn multi_observation_bandwidth_is_scott_rule() {
    let xs = [1.0, 2.0, 4.0, 7.0];
    let (a, b) = (0.0, 10.0);
    let mean = xs.iter().sum::<f64>() / 4.0;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    let bw = (1.06 * sd * 4f64.powf(-0.2)).max((b - a) / 100.0);
    let est = fit_parzen(&xs, (a, b), false, &TpeConfig::default()).unwrap();
    for x in [0.0, 1.5, 3.3, 9.9] {
        let mut want = 0.2 * truncnorm_pdf(x, 5.0, 10.0, a, b);
        for &c in &xs {
            want += 0.2 * truncnorm_pdf(x, c, bw, a, b);
        }
        assert!((pdf(&est, x) - want).abs() < 1e-12, "x={x}");
    }
}

#[test]
fn tight_cluster_hits_bandwidth_floor() {
    let est = fit_parzen(&[0.5, 0.5, 0.5], (0.0, 2.0), false, &TpeConfig::default()).unwrap();
    assert!(est.components()[..3]
        .iter()
        .all(|c| (c.bandwidth - 0.02).abs() < 1e-15));
}

#[test]
fn log_scaled_density_integrates_in_both_coordinates() {
    let est = fit_parzen(
        &[2e-4, 5e-4, 9e-4],
        (1e-4, 1e-3),
        true,
        &TpeConfig::default(),
    )
    .unwrap();
    let (lo, hi) = est.domain();
    assert!((lo - 1e-4f64.ln()).abs() < 1e-12 && (hi - 1e-3f64.ln()).abs() < 1e-12);
    let in_log = simpson(|z| pdf(&est, z), lo, hi, 10_000);
    assert!((in_log - 1.0).abs() < 1e-6, "{in_log}");
    // Change of variables back to parameter units: p(v) = p_log(ln v) / v.
    let in_raw = simpson(|v| pdf(&est, v.ln()) / v, 1e-4, 1e-3, 200_000);
    assert!((in_raw - 1.0).abs() < 1e-4, "{in_raw}");
}

#[test]
fn samples_follow_the_mixture_cdf() {
    let est = fit_parzen(&[0.1, 0.15, 0.8], (0.0, 1.0), false, &TpeConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let mut draws: Vec<f64> = (0..n).map(|_| est.sample(&mut rng)).collect();
    draws.sort_by(f64::total_cmp);
    assert!(draws[0] >= 0.0 && draws[n - 1] <= 1.0);
    let mut worst: f64 = 0.0;
    for q in 1..20 {
        let x = q as f64 / 20.0;
        let cdf = simpson(|t| pdf(&est, t), 0.0, x, 2_000);
        let emp = draws.partition_point(|&d| d <= x) as f64 / n as f64;
        worst = worst.max((cdf - emp).abs());
    }
    // Kolmogorov bound at ~99.9%: 1.95 / sqrt(n).
    assert!(worst < 1.95 / (n as f64).sqrt(), "max CDF gap {worst}");
}
