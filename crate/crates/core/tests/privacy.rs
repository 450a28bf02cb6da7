use rand::RngCore;

use privopf::cases;
use privopf::network::parse_case;
use privopf::privacy::{
    default_ranges, load_stream, obfuscate_all, obfuscate_all_with, planar_laplace_radius, polar_laplace_obfuscate,
    Mechanism, PrivacyParams,
};
use privopf::ComplexQuantity as C;

const N: usize = 100_000;

fn mean_radius(alpha: f64, epsilon: f64, seed: u64) -> f64 {
    let params = PrivacyParams::new(epsilon, alpha, Mechanism::PolarLaplace).unwrap();
    let mut rng = load_stream(seed, 0);
    let origin = C::new(0.5, 0.25);
    (0..N).map(|_| (polar_laplace_obfuscate(origin, &params, &mut rng) - origin).abs()).sum::<f64>() / N as f64
}

#[test]
fn mean_radius_is_two_scales_and_doubles_with_alpha() {
    // Gamma(2, s) has mean 2s and standard deviation √2·s.
    for (alpha, epsilon) in [(0.05, 1.0), (0.1, 1.0), (0.1, 0.5)] {
        let s = alpha / epsilon;
        let m = mean_radius(alpha, epsilon, 11);
        let tol = 4.0 * 2f64.sqrt() * s / (N as f64).sqrt();
        assert!((m - 2.0 * s).abs() <= tol, "α={alpha} ε={epsilon}: mean {m} vs {}", 2.0 * s);
    }
    let ratio = mean_radius(0.2, 1.0, 12) / mean_radius(0.1, 1.0, 13);
    assert!((ratio - 2.0).abs() < 0.03, "{ratio}");
}

#[test]
fn angles_are_uniform() {
    let params = PrivacyParams::new(1.0, 0.1, Mechanism::PolarLaplace).unwrap();
    let mut rng = load_stream(3, 0);
    let mut quadrants = [0usize; 4];
    for _ in 0..N {
        let d = polar_laplace_obfuscate(C::ZERO, &params, &mut rng);
        quadrants[(d.re < 0.0) as usize * 2 + (d.im < 0.0) as usize] += 1;
    }
    let sigma = (N as f64 * 0.25 * 0.75).sqrt();
    for q in quadrants {
        assert!((q as f64 - N as f64 / 4.0).abs() <= 4.0 * sigma, "{quadrants:?}");
    }
}

#[test]
fn radius_quantile_is_monotone() {
    let mut last = 0.0;
    for k in 1..1000 {
        let r = planar_laplace_radius(k as f64 / 1000.0, 0.1);
        assert!(r > last);
        last = r;
    }
}

#[test]
fn equal_seeds_give_equal_releases() {
    let model = parse_case(cases::CASE9).unwrap();
    for mechanism in [Mechanism::PolarLaplace, Mechanism::Piecewise] {
        let params = PrivacyParams::new(1.0, 0.1, mechanism).unwrap();
        let ranges = default_ranges(&model);
        let a = obfuscate_all(&model, &params, Some(&ranges), 42).unwrap();
        let b = obfuscate_all(&model, &params, Some(&ranges), 42).unwrap();
        let c = obfuscate_all(&model, &params, Some(&ranges), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }
}

struct ZeroStream;

impl RngCore for ZeroStream {
    fn next_u32(&mut self) -> u32 {
        0
    }

    fn next_u64(&mut self) -> u64 {
        0
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        dst.fill(0);
    }
}

#[test]
fn zero_probability_stream_releases_true_loads() {
    // An all-zero stream draws angle 0 and radius quantile 0.
    let model = parse_case(cases::CASE5).unwrap();
    let params = PrivacyParams::new(1.0, 0.1, Mechanism::PolarLaplace).unwrap();
    let released = obfuscate_all_with(&model, &params, None, 0, |_| ZeroStream).unwrap();
    let original: Vec<C> = model.loads().iter().map(|l| l.demand).collect();
    assert_eq!(released.values(), original.as_slice());
}

#[test]
fn load_streams_are_uncorrelated() {
    let params = PrivacyParams::new(1.0, 0.1, Mechanism::PolarLaplace).unwrap();
    let draws = |k: usize| {
        let mut rng = load_stream(9, k);
        (0..20_000).map(|_| polar_laplace_obfuscate(C::ZERO, &params, &mut rng).re).collect::<Vec<f64>>()
    };
    let (a, b) = (draws(0), draws(1));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let corr = cov / (var(&a, ma) * var(&b, mb)).sqrt();
    // 4σ for independent samples is 4/√n ≈ 0.028.
    assert!(corr.abs() < 4.0 / n.sqrt(), "{corr}");
    assert_ne!(a[..10], b[..10]);
}

#[test]
fn piecewise_needs_ranges() {
    let model = parse_case(cases::CASE3).unwrap();
    let params = PrivacyParams::new(1.0, 0.1, Mechanism::Piecewise).unwrap();
    assert!(obfuscate_all(&model, &params, None, 0).is_err());
    assert!(obfuscate_all(&model, &params, Some(&default_ranges(&model)[..1]), 0).is_err());
}
