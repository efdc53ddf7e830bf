use rayon::prelude::*;

use super::{LyapunovSpec, TestFunction};
use crate::dynamics::{check_gamma, McEstimate, SystemSpec, Welford};
use crate::error::{Error, Result};
use crate::measure::{bootstrap_mean_se, EmpiricalMeasure};
use crate::rng::{self, tags};

/// `γ⁻² ∫ (W − W∘f) dm`, with a chain bootstrap standard error.
pub fn expansion_lhs<F>(m: &EmpiricalMeasure, w: &TestFunction, f: &F, seed: u64) -> Result<McEstimate>
where
    F: Fn(&[f64], &mut [f64]) + Sync + ?Sized,
{
    let gamma = m.gamma();
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("expansion needs a positive step size, got {gamma}")));
    }
    let scale = 1.0 / (gamma * gamma);
    let values: Vec<f64> = m
        .samples()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|x| {
            let mut fx = vec![0.0; x.len()];
            f(x, &mut fx);
            (w.value(x) - w.value(&fx)) * scale
        })
        .collect();
    let estimate = values.iter().zip(m.weights()).map(|(v, p)| v * p).sum();
    Ok(McEstimate { estimate, standard_error: bootstrap_mean_se(m, &values, seed) })
}

/// `½ Σ_x m_x E[e(x, ε)ᵀ ∇²W(x) e(x, ε)]` by Monte Carlo, `n` draws per point.
pub fn expansion_rhs(
    spec: &SystemSpec,
    w: &TestFunction,
    fp_masses: &[(Vec<f64>, f64)],
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("expansion_rhs needs at least 2 samples".into()));
    }
    let mut estimate = 0.0;
    let mut var = 0.0;
    for (j, (x, mass)) in fp_masses.iter().enumerate() {
        if !(0.0..=1.0).contains(mass) {
            return Err(Error::InvalidArgument(format!("mass {mass} outside [0, 1]")));
        }
        if *mass == 0.0 {
            continue;
        }
        let h = w.hessian(x);
        if h.iter().all(|v| *v == 0.0) {
            continue;
        }
        let mut rng = rng::stream(seed, &[tags::EXPANSION, j as u64]);
        let mut y = vec![0.0; spec.noise_dim()];
        let mut acc = Welford::default();
        for _ in 0..n {
            spec.sample_noise(&mut rng, &mut y);
            let e = crate::linalg::to_dvector(&spec.gain(x, &y));
            acc.push(e.dot(&(&h * &e)));
        }
        let q = acc.estimate();
        estimate += 0.5 * mass * q.estimate;
        var += (0.5 * mass * q.standard_error).powi(2);
    }
    Ok(McEstimate { estimate, standard_error: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// `max_x (P^γV(x) − αV(x))` over the probes.
    pub beta_hat: f64,
    pub satisfied: bool,
    /// `β̂ / (1 − α)`.
    pub tightness_bound: f64,
}

/// Probe-based check of `P^γ V ≤ αV + β`.
pub fn drift_check(
    spec: &SystemSpec,
    v: &LyapunovSpec,
    alpha: f64,
    probes: &[Vec<f64>],
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<DriftReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if probes.is_empty() {
        return Err(Error::InvalidArgument("drift check needs at least one probe".into()));
    }
    check_gamma(gamma)?;
    let value = v.value_fn();
    let gaps: Vec<f64> = probes
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = rng::stream(seed, &[tags::KERNEL, i as u64]);
            let pv = spec.transition_mean_with(value.as_ref(), x, gamma, n, &mut rng)?;
            Ok(pv.estimate - alpha * v.value(x))
        })
        .collect::<Result<_>>()?;
    let beta_hat = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DriftReport { beta_hat, satisfied: beta_hat.is_finite(), tightness_bound: beta_hat / (1.0 - alpha) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscontinuityReport {
    /// Fraction of draws whose next state lies in the discontinuity set, per probe.
    pub fractions: Vec<f64>,
    pub max: f64,
}

/// Monte-Carlo landing frequency of one step in the discontinuity set.
pub fn discontinuity_avoidance(
    spec: &SystemSpec,
    probes: &[Vec<f64>],
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<DiscontinuityReport> {
    let indicator = spec.discontinuity().ok_or(Error::MissingIndicator)?.clone();
    check_gamma(gamma)?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one draw per probe".into()));
    }
    let fractions: Vec<f64> = probes
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = rng::stream(seed, &[tags::PROBE, i as u64]);
            let mut y = vec![0.0; spec.noise_dim()];
            if x.len() != spec.dim() {
                return Err(Error::DimensionMismatch { expected: spec.dim(), got: x.len() });
            }
            // f(x) is the same for every draw
            let fx = spec.drift(x);
            let (mut next, mut scratch) = (vec![0.0; x.len()], vec![0.0; x.len()]);
            let mut hits = 0usize;
            for _ in 0..n {
                spec.sample_noise(&mut rng, &mut y);
                next.copy_from_slice(&fx);
                spec.perturb_into(x, gamma, &y, &mut next, &mut scratch);
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { chain: None, step: 1, state: next });
                }
                if indicator(&next) {
                    hits += 1;
                }
            }
            Ok(hits as f64 / n as f64)
        })
        .collect::<Result<_>>()?;
    let max = fractions.iter().copied().fold(0.0, f64::max);
    Ok(DiscontinuityReport { fractions, max })
}
