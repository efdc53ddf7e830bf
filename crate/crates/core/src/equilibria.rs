//! Fixed points of the drift and the linear algebra around them: Hessian
//! classification, the saddle gap `min eig(H − DfᵀHDf)`, the spectral
//! projector onto the non-contracting subspace of `Df`, and the noise
//! excitation of that subspace.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{McEstimate, SystemSpec, Welford};
use crate::error::{Error, Result};
use crate::linalg::{self, distance, norm};
use crate::lyapunov::LyapunovSpec;
use crate::region::BoxRegion;
use crate::rng::{self, tags};

/// Default eigenvalue tolerance separating degenerate from strict curvature.
pub const DEGENERACY_TOL: f64 = 1e-6;
/// Largest `|∇V|` accepted at a point submitted for classification.
pub const CRITICAL_GRADIENT_TOL: f64 = 1e-6;
/// Relative width of the forbidden ring around the splitting modulus.
pub const RING_TOL: f64 = 1e-9;
/// Growth factor of `|Q_p| / |Q_1|` past which an iterated form is divergent.
pub const DIVERGENCE_GROWTH: f64 = 1e6;

const NEWTON_MAX_ITER: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    StrictLocalMax,
    StrictLocalMin,
    Saddle,
    Degenerate,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::StrictLocalMax => "strict_local_max",
            Classification::StrictLocalMin => "strict_local_min",
            Classification::Saddle => "saddle",
            Classification::Degenerate => "degenerate",
        }
    }
}

/// Damped Newton on `f(x) − x` from quasi-random starts in the box.
///
/// Roots with `|f(x) − x| ≤ tol` are sorted lexicographically and merged when
/// closer than `10·tol`.
pub fn find_fixed_points<F>(f: &F, search_box: &BoxRegion, n_starts: usize, tol: f64, seed: u64) -> Vec<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) + Sync + ?Sized,
{
    let starts = search_box.quasi_random(n_starts.max(1), rng::child_seed(seed, &[tags::MULTISTART]));
    let scale = search_box.lo.iter().zip(&search_box.hi).map(|(a, b)| (b - a).abs()).fold(1.0, f64::max);
    let mut roots: Vec<Vec<f64>> = starts
        .par_iter()
        .filter_map(|x0| newton_fixed_point(f, x0, tol, search_box, scale))
        .collect();
    roots.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for r in roots {
        if kept.iter().all(|k| distance(k, &r) > 10.0 * tol) {
            kept.push(r);
        }
    }
    kept
}

fn residual_of<F>(f: &F, x: &[f64], buf: &mut [f64]) -> f64
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    f(x, buf);
    buf.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn newton_fixed_point<F>(f: &F, x0: &[f64], tol: f64, search_box: &BoxRegion, scale: f64) -> Option<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut buf = vec![0.0; d];
    let mut res = residual_of(f, &x, &mut buf);
    let target = (tol * 1e-4).max(1e-15);
    for _ in 0..NEWTON_MAX_ITER {
        if !res.is_finite() {
            return None;
        }
        if res <= target {
            break;
        }
        f(&x, &mut buf);
        let g = DVector::from_iterator(d, buf.iter().zip(&x).map(|(a, b)| a - b));
        let jac = linalg::fd_jacobian(f, &x, d) - DMatrix::<f64>::identity(d, d);
        let delta = jac.lu().solve(&(-&g))?;
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-8 {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(xi, di)| xi + t * di).collect();
            let r = residual_of(f, &trial, &mut buf);
            if r.is_finite() && r < (1.0 - 1e-4 * t) * res {
                x = trial;
                res = r;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let far = x
            .iter()
            .zip(search_box.lo.iter().zip(&search_box.hi))
            .any(|(v, (a, b))| *v < a - scale || *v > b + scale);
        if far {
            return None;
        }
    }
    (res <= tol).then_some(x)
}

/// Sign pattern of the eigenvalues of `∇²V(x*)`.
pub fn classify(v: &LyapunovSpec, x: &[f64], degeneracy_tol: f64) -> Result<Classification> {
    let g = norm(&v.gradient(x));
    if !(g <= CRITICAL_GRADIENT_TOL) {
        return Err(Error::NotCritical { norm: g });
    }
    Ok(classify_hessian(&v.hessian(x), degeneracy_tol))
}

pub fn classify_hessian(h: &DMatrix<f64>, degeneracy_tol: f64) -> Classification {
    let ev = linalg::symmetric_eigenvalues(h);
    if ev.iter().any(|l| l.abs() <= degeneracy_tol) {
        Classification::Degenerate
    } else if ev.iter().all(|l| *l < 0.0) {
        Classification::StrictLocalMax
    } else if ev.iter().all(|l| *l > 0.0) {
        Classification::StrictLocalMin
    } else {
        Classification::Saddle
    }
}

/// Smallest eigenvalue of the symmetrized `∇²V − Dfᵀ ∇²V Df` at `x*`.
pub fn saddle_gap<F>(v: &LyapunovSpec, f: &F, x: &[f64]) -> f64
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let h = v.hessian(x);
    let a = linalg::fd_jacobian(f, x, x.len());
    saddle_gap_matrix(&h, &a)
}

pub fn saddle_gap_matrix(h: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let m = h - a.transpose() * h * a;
    linalg::symmetric_eigenvalues(&m)[0]
}

/// Spectral projector onto the invariant subspace of eigenvalues with
/// `|λ| ≥ threshold`, along the complementary one, and its rank.
///
/// Computed as `(I + sign(M)) / 2` with `M = (A/t + I)⁻¹(A/t − I)`: the
/// Möbius map sends the circle `|z| = 1` to the imaginary axis, so the matrix
/// sign function splits the spectrum exactly at the threshold. Complex pairs
/// stay together and the result is real.
pub fn unstable_projector(a: &DMatrix<f64>, threshold: f64) -> Result<(DMatrix<f64>, usize)> {
    let d = a.nrows();
    if d != a.ncols() {
        return Err(Error::DimensionMismatch { expected: d, got: a.ncols() });
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    let moduli: Vec<f64> = a.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect();
    if let Some(m) = moduli.iter().find(|m| ((*m / threshold) - 1.0).abs() <= RING_TOL) {
        return Err(Error::SpectrumOnThreshold { modulus: *m, threshold });
    }
    let rank = moduli.iter().filter(|m| **m > threshold).count();
    let eye = DMatrix::<f64>::identity(d, d);
    if rank == 0 {
        return Ok((DMatrix::zeros(d, d), 0));
    }
    if rank == d {
        return Ok((eye, d));
    }
    let b = a / threshold;
    let lhs = (&b + &eye).lu();
    let mut s = lhs
        .solve(&(&b - &eye))
        .ok_or(Error::SpectrumOnThreshold { modulus: threshold, threshold })?;
    for _ in 0..200 {
        let inv = s.clone().try_inverse().ok_or(Error::SpectrumOnThreshold { modulus: threshold, threshold })?;
        let det = s.determinant().abs();
        let mu = if det > 0.0 && det.is_finite() { det.powf(-1.0 / d as f64) } else { 1.0 };
        let next = (&s * mu + inv / mu) * 0.5;
        let change = (&next - &s).abs().max();
        s = next;
        if change <= 1e-15 * s.abs().max().max(1.0) {
            break;
        }
    }
    let mut p = (eye + s) * 0.5;
    // One idempotent polish step: P ← 3P² − 2P³.
    let p2 = &p * &p;
    p = &p2 * 3.0 - &p2 * &p * 2.0;
    Ok((p, rank))
}

/// Monte-Carlo estimate of `E ‖Π e(x*, ε)‖²`.
pub fn noise_excitation(spec: &SystemSpec, x: &[f64], projector: &DMatrix<f64>, n: usize, seed: u64) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("noise excitation needs at least 2 samples".into()));
    }
    let mut rng = rng::stream(seed, &[tags::EXCITATION]);
    let mut y = vec![0.0; spec.noise_dim()];
    let mut acc = Welford::default();
    for _ in 0..n {
        spec.sample_noise(&mut rng, &mut y);
        let e = linalg::to_dvector(&spec.gain(x, &y));
        acc.push((projector * e).norm_squared());
    }
    Ok(acc.estimate())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IteratedForm {
    /// `Q_1, …, Q_p` up to the last finite entry.
    pub values: Vec<f64>,
    pub divergent: bool,
}

/// `Q_p = mean_v (A^p v)ᵀ H (A^p v)` for `p = 1..=p_max`.
pub fn iterated_form_curve(a: &DMatrix<f64>, h: &DMatrix<f64>, samples: &[Vec<f64>], p_max: usize) -> Result<IteratedForm> {
    if p_max == 0 || samples.is_empty() {
        return Err(Error::InvalidArgument("need p_max >= 1 and at least one sample".into()));
    }
    let mut vs: Vec<DVector<f64>> = samples.iter().map(|s| linalg::to_dvector(s)).collect();
    let mut values = Vec::with_capacity(p_max);
    let mut divergent = false;
    for _ in 0..p_max {
        for v in vs.iter_mut() {
            *v = a * &*v;
        }
        let q = vs.iter().map(|v| v.dot(&(h * v))).sum::<f64>() / vs.len() as f64;
        if !q.is_finite() {
            divergent = true;
            break;
        }
        values.push(q);
    }
    let first = values.first().map_or(0.0, |q| q.abs());
    if first > 0.0 && values.iter().any(|q| q.abs() >= DIVERGENCE_GROWTH * first) {
        divergent = true;
    }
    Ok(IteratedForm { values, divergent })
}

/// `min_{0 ≤ p ≤ p_max} |A^p v|`.
pub fn lemma_probe(a: &DMatrix<f64>, v: &[f64], p_max: usize) -> f64 {
    let mut w = linalg::to_dvector(v);
    let mut best = w.norm();
    for _ in 0..p_max {
        w = a * w;
        best = best.min(w.norm());
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub location: Vec<f64>,
    pub residual: f64,
    pub jacobian: DMatrix<f64>,
    pub hessian: DMatrix<f64>,
    pub classification: Classification,
    pub saddle_gap: f64,
    pub unstable_dim: usize,
    pub projector: DMatrix<f64>,
    pub noise_excitation: McEstimate,
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub degeneracy_tol: f64,
    pub excitation_samples: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { degeneracy_tol: DEGENERACY_TOL, excitation_samples: 100_000, seed: 0 }
    }
}

/// Full report for one fixed point of `spec`'s drift.
pub fn analyze_fixed_point(
    spec: &SystemSpec,
    v: &LyapunovSpec,
    x: &[f64],
    opts: &AnalysisOptions,
) -> Result<FixedPointReport> {
    let drift = spec.drift_map();
    let fx = spec.drift(x);
    let residual = distance(&fx, x);
    let jacobian = linalg::fd_jacobian(drift.as_ref(), x, x.len());
    let hessian = v.hessian(x);
    let classification = classify(v, x, opts.degeneracy_tol)?;
    let gap = saddle_gap_matrix(&hessian, &jacobian);
    let (projector, unstable_dim) = unstable_projector(&jacobian, 1.0)?;
    let excitation = noise_excitation(spec, x, &projector, opts.excitation_samples, opts.seed)?;
    Ok(FixedPointReport {
        location: x.to_vec(),
        residual,
        jacobian,
        hessian,
        classification,
        saddle_gap: gap,
        unstable_dim,
        projector,
        noise_excitation: excitation,
        stability: if unstable_dim > 0 { Stability::Unstable } else { Stability::Stable },
    })
}
