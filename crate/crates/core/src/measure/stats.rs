use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::EmpiricalMeasure;
use crate::dynamics::{ScalarFn, SystemSpec};
use crate::error::{Error, Result};
use crate::linalg::distance;
use crate::rng::{self, tags};

/// Number of slicing directions for `d >= 2`.
pub const SLICES: usize = 64;
/// Bootstrap resamples used for every standard error in this module.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Contiguous blocks used in place of chains for single-chain measures.
const FALLBACK_BLOCKS: usize = 20;

/// `Σ w_i g(x_i)`.
pub fn integrate<G: Fn(&[f64]) -> f64 + ?Sized>(m: &EmpiricalMeasure, g: &G) -> Result<f64> {
    let mut total = 0.0;
    for (i, (x, w)) in m.iter().enumerate() {
        let v = g(x);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { index: i });
        }
        total += w * v;
    }
    Ok(total)
}

/// Total weight of samples within `radius` of `center` (closed ball).
pub fn mass_in_ball(m: &EmpiricalMeasure, center: &[f64], radius: f64) -> f64 {
    m.iter()
        .filter(|(x, _)| distance(x, center) <= radius)
        .fold(0.0, |acc, (_, w)| acc + w)
        .min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub masses: Vec<f64>,
    pub total: f64,
}

/// Ball masses around each fixed point plus the mass of their union.
pub fn localization_report(m: &EmpiricalMeasure, fixed_points: &[Vec<f64>], radius: f64) -> Result<LocalizationReport> {
    if fixed_points.is_empty() {
        return Err(Error::InvalidArgument("no fixed points given".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    for (i, p) in fixed_points.iter().enumerate() {
        if p.len() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), got: p.len() });
        }
        for (j, q) in fixed_points.iter().enumerate().skip(i + 1) {
            let d = distance(p, q);
            if d <= 2.0 * radius {
                return Err(Error::OverlappingBalls { first: i, second: j, distance: d, radius });
            }
        }
    }
    let masses: Vec<f64> = fixed_points.iter().map(|p| mass_in_ball(m, p, radius)).collect();
    let total = m
        .iter()
        .filter(|(x, _)| fixed_points.iter().any(|p| distance(x, p) <= radius))
        .fold(0.0, |acc, (_, w)| acc + w)
        .min(1.0);
    Ok(LocalizationReport { masses, total })
}

/// Exact 1-Wasserstein distance in one dimension, sliced 1-Wasserstein over a
/// fixed set of directions otherwise.
pub fn weak_distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if a.dim() == 1 {
        let pa: Vec<(f64, f64)> = a.iter().map(|(x, w)| (x[0], w)).collect();
        let pb: Vec<(f64, f64)> = b.iter().map(|(x, w)| (x[0], w)).collect();
        return Ok(wasserstein_1d(&pa, &pb));
    }
    let dirs = slicing_directions(a.dim());
    let total: f64 = dirs
        .iter()
        .map(|u| {
            let project = |m: &EmpiricalMeasure| -> Vec<(f64, f64)> {
                m.iter().map(|(x, w)| (x.iter().zip(u).map(|(p, q)| p * q).sum(), w)).collect()
            };
            wasserstein_1d(&project(a), &project(b))
        })
        .sum();
    Ok(total / dirs.len() as f64)
}

/// `∫ |F_a − F_b|` for weighted atoms.
fn wasserstein_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(a.len() + b.len());
    events.extend(a.iter().copied());
    events.extend(b.iter().map(|&(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    for pair in events.windows(2) {
        cdf_gap += pair[0].1;
        total += cdf_gap.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Unit directions: evenly spaced half-circle angles in the plane, seeded
/// gaussian directions in higher dimension.
fn slicing_directions(dim: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        return (0..SLICES)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / SLICES as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut rng = rng::stream(0x51_1CE5, &[tags::DIRECTIONS, dim as u64]);
    (0..SLICES)
        .map(|_| {
            let mut v = vec![0.0; dim];
            crate::rng::NoiseLaw::Gaussian.sample(&mut rng, &mut v);
            let n = crate::linalg::norm(&v);
            v.iter().map(|c| c / n).collect()
        })
        .collect()
}

/// Per-function invariance gaps `ν̂(g) − ν̂(P^γ g)` with bootstrap standard
/// errors over chains.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceDefect {
    pub gaps: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub max_abs: f64,
}

pub fn invariance_defect(
    spec: &SystemSpec,
    m: &EmpiricalMeasure,
    dictionary: &[ScalarFn],
    n_samples: usize,
    seed: u64,
) -> Result<InvarianceDefect> {
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("test-function dictionary is empty".into()));
    }
    if n_samples < 2 {
        return Err(Error::InvalidArgument("invariance defect needs at least 2 kernel samples".into()));
    }
    if m.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: m.dim() });
    }
    let gamma = m.gamma();
    let k = dictionary.len();
    // contributions[i * k + j] = g_j(x_i) − P̂g_j(x_i), all g sharing one set of draws.
    let contributions: Vec<Vec<f64>> = (0..m.len())
        .into_par_iter()
        .map(|i| {
            let x = m.sample(i);
            let mut rng = rng::stream(seed, &[tags::KERNEL, i as u64]);
            let mut y = vec![0.0; spec.noise_dim()];
            let mut next = vec![0.0; spec.dim()];
            let mut scratch = vec![0.0; spec.dim()];
            let mut kernel = vec![0.0; k];
            for _ in 0..n_samples {
                spec.sample_noise(&mut rng, &mut y);
                spec.step_into(x, gamma, &y, &mut next, &mut scratch);
                for (acc, g) in kernel.iter_mut().zip(dictionary) {
                    *acc += g(&next);
                }
            }
            let mut out = Vec::with_capacity(k);
            for (j, g) in dictionary.iter().enumerate() {
                let here = g(x);
                let gap = here - kernel[j] / n_samples as f64;
                if !gap.is_finite() {
                    return Err(Error::NonFiniteValue { index: i });
                }
                out.push(gap);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut gaps = vec![0.0; k];
    for (c, w) in contributions.iter().zip(m.weights()) {
        for (g, v) in gaps.iter_mut().zip(c) {
            *g += w * v;
        }
    }
    let standard_errors = (0..k)
        .map(|j| {
            let values: Vec<f64> = contributions.iter().map(|c| c[j]).collect();
            bootstrap_mean_se(m, &values, rng::child_seed(seed, &[tags::BOOTSTRAP, j as u64]))
        })
        .collect();
    let max_abs = gaps.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
    Ok(InvarianceDefect { gaps, standard_errors, max_abs })
}

/// Bootstrap standard error of the weighted mean of `values` over `m`,
/// resampling whole chains (or contiguous blocks for a single chain).
pub fn bootstrap_mean_se(m: &EmpiricalMeasure, values: &[f64], seed: u64) -> f64 {
    assert_eq!(values.len(), m.len());
    let ranges: Vec<std::ops::Range<usize>> = if m.group_count() >= 2 {
        m.groups().collect()
    } else {
        let n = m.len();
        let blocks = FALLBACK_BLOCKS.min(n);
        (0..blocks).map(|b| b * n / blocks..(b + 1) * n / blocks).collect()
    };
    if ranges.len() < 2 {
        return 0.0;
    }
    let w = m.weights();
    let groups: Vec<(f64, f64)> = ranges
        .iter()
        .map(|r| r.clone().fold((0.0, 0.0), |(s, t), i| (s + w[i] * values[i], t + w[i])))
        .collect();
    let mut rng = rng::stream(seed, &[tags::BOOTSTRAP]);
    let stats: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let (s, t) = (0..groups.len()).fold((0.0, 0.0), |(s, t), _| {
                let g = groups[rng.random_range(0..groups.len())];
                (s + g.0, t + g.1)
            });
            if t > 0.0 { s / t } else { 0.0 }
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    (stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (stats.len() - 1) as f64).sqrt()
}

/// Bounded Lipschitz test functions: clipped coordinates, clipped pairwise
/// products and, when given, `V / (1 + |V|)`.
pub fn default_dictionary(dim: usize, clip: f64, v: Option<ScalarFn>) -> Vec<ScalarFn> {
    let mut out: Vec<ScalarFn> = Vec::new();
    for i in 0..dim {
        out.push(Arc::new(move |x: &[f64]| x[i].clamp(-clip, clip)));
    }
    for i in 0..dim {
        for j in i..dim {
            out.push(Arc::new(move |x: &[f64]| (x[i] * x[j]).clamp(-clip, clip)));
        }
    }
    if let Some(v) = v {
        out.push(Arc::new(move |x: &[f64]| {
            let val = v(x);
            val / (1.0 + val.abs())
        }));
    }
    out
}
