//! Finite-sample surrogates of invariant measures and the statistics computed
//! on them.
//!
//! An [`EmpiricalMeasure`] is a weighted point cloud. Measures produced by
//! [`estimate_invariant`] keep track of which chain each sample came from so
//! that standard errors can be bootstrapped over chains.

mod estimate;
mod io;
mod stats;

pub use estimate::{estimate_invariant, moment_curve, EstimationOptions, DEFAULT_MAX_SAMPLES};
pub use io::{read_measure_csv, write_measure_csv};
pub use stats::{
    bootstrap_mean_se, default_dictionary, integrate, invariance_defect, localization_report, mass_in_ball,
    weak_distance, InvarianceDefect, LocalizationReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provenance of an empirical measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureMeta {
    pub gamma: f64,
    pub seed: u64,
    pub chains: usize,
    pub burn_in: usize,
    pub horizon: usize,
    pub thinning: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    /// `group_offsets[c]..group_offsets[c + 1]` are the samples of chain `c`.
    group_offsets: Vec<usize>,
    meta: MeasureMeta,
}

impl EmpiricalMeasure {
    /// Weighted measure; weights are normalized to sum to one.
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>, meta: MeasureMeta) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::InvalidArgument("coordinate buffer is not a multiple of the dimension".into()));
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { dim, coords, weights, group_offsets: vec![0, n], meta })
    }

    /// Equal-weight measure on the given points.
    pub fn uniform(samples: &[Vec<f64>], gamma: f64) -> Result<Self> {
        let dim = samples.first().ok_or(Error::EmptyMeasure)?.len();
        if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let coords = samples.concat();
        let n = samples.len();
        Self::new(dim, coords, vec![1.0; n], MeasureMeta::single(gamma))
    }

    pub fn dirac(x: &[f64], gamma: f64) -> Self {
        Self::uniform(&[x.to_vec()], gamma).expect("a single finite point is a valid measure")
    }

    /// Pools equal-length per-chain sample blocks with equal weights.
    pub(crate) fn from_chains(dim: usize, chains: Vec<Vec<f64>>, meta: MeasureMeta) -> Result<Self> {
        let mut offsets = Vec::with_capacity(chains.len() + 1);
        offsets.push(0);
        let mut coords = Vec::with_capacity(chains.iter().map(Vec::len).sum());
        for c in chains {
            coords.extend_from_slice(&c);
            offsets.push(coords.len() / dim);
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        let weights = vec![1.0 / n as f64; n];
        Ok(Self { dim, coords, weights, group_offsets: offsets, meta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.meta.gamma
    }

    pub fn meta(&self) -> &MeasureMeta {
        &self.meta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// `(sample, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.samples().zip(self.weights.iter().copied())
    }

    /// Index ranges of the chains that produced the samples.
    pub fn groups(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.group_offsets.windows(2).map(|w| w[0]..w[1])
    }

    pub fn group_count(&self) -> usize {
        self.group_offsets.len() - 1
    }
}

impl MeasureMeta {
    pub(crate) fn single(gamma: f64) -> Self {
        Self { gamma, seed: 0, chains: 1, burn_in: 0, horizon: 0, thinning: 1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_normalized() {
        let m = EmpiricalMeasure::new(1, vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 7.0], MeasureMeta::single(0.1)).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(m.weights()[2], 0.7);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(EmpiricalMeasure::new(2, vec![0.0, 1.0, 2.0], vec![1.0], MeasureMeta::single(0.1)).is_err());
        assert!(EmpiricalMeasure::new(1, vec![], vec![], MeasureMeta::single(0.1)).is_err());
        assert!(EmpiricalMeasure::new(1, vec![1.0], vec![-1.0], MeasureMeta::single(0.1)).is_err());
        assert!(EmpiricalMeasure::uniform(&[vec![0.0], vec![0.0, 1.0]], 0.1).is_err());
    }
}
