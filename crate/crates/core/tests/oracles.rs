//! Independent second routes for values the library computes one way.

use nalgebra::DMatrix;
use pdslab::equilibria::unstable_projector;
use pdslab::quantizer::{adaptive_simpson, centroid_1d, distortion_1d, SourceLaw};
use pdslab::rng::{self, NoiseLaw};
use pdslab::SystemSpec;
use rand::Rng;

fn half_map() -> SystemSpec {
    SystemSpec::from_fn(1, |x, out| out[0] = 0.5 * x[0]).with_noise(NoiseLaw::Gaussian)
}

fn gaussian_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[test]
fn transition_mean_matches_quadrature() {
    let spec = half_map();
    for (x, gamma) in [(0.3, 0.1), (-1.2, 0.5), (2.0, 1.0)] {
        let g = |y: &[f64]| y[0].cos();
        let quad = adaptive_simpson(&|z: f64| (0.5 * x + gamma * z).cos() * gaussian_pdf(z), -12.0, 12.0, 1e-12).unwrap();
        let closed = (0.5 * x).cos() * (-gamma * gamma / 2.0).exp();
        assert!((quad - closed).abs() < 1e-9, "quadrature {quad} vs closed form {closed}");
        let mc = spec.transition_mean(g, &[x], gamma, 200_000, 5).unwrap();
        assert!((mc.estimate - quad).abs() < 4.0 * mc.standard_error, "{mc:?} vs {quad}");
    }
}

#[test]
fn zero_step_transition_mean_is_exact() {
    let mc = half_map().transition_mean(|y: &[f64]| y[0] * y[0], &[0.8], 0.0, 10, 1).unwrap();
    assert_eq!(mc.estimate, 0.4 * 0.4);
    assert_eq!(mc.standard_error, 0.0);
}

fn random_similarity(seed: u64, d: usize) -> DMatrix<f64> {
    let mut r = rng::stream(seed, &[0]);
    loop {
        let s = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0f64));
        if s.determinant().abs() > 0.2 {
            return s;
        }
    }
}

#[test]
fn projector_matches_eigendecomposition() {
    let eigen: [f64; 4] = [2.5, 0.4, -1.7, 0.9];
    for seed in 0..20 {
        let s = random_similarity(seed, 4);
        let s_inv = s.clone().try_inverse().unwrap();
        let a = &s * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&eigen)) * &s_inv;
        let keep = eigen.map(|l| if l.abs() > 1.0 { 1.0 } else { 0.0 });
        let expected = &s * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&keep)) * &s_inv;
        let (p, rank) = unstable_projector(&a, 1.0).unwrap();
        assert_eq!(rank, 2);
        let err = (&p - &expected).abs().max();
        assert!(err < 1e-8, "seed {seed}: projector error {err}");
    }
}

#[test]
fn ramp_centroids_and_distortion() {
    let ramp = SourceLaw::Ramp;
    for (a, b) in [(0.0, 1.0), (0.2, 0.7), (0.5, 0.51)] {
        let closed = 2.0 / 3.0 * (b * b * b - a * a * a) / (b * b - a * a);
        assert!((centroid_1d(&ramp, a, b).unwrap() - closed).abs() < 1e-9);
    }
    // one boundary at 1/2 on the uniform law: two cells of width 1/2
    let d = distortion_1d(&SourceLaw::Uniform1d, &[0.5]).unwrap();
    assert!((d - 1.0 / 48.0).abs() < 1e-12);
}
