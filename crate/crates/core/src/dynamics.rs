//! Perturbed dynamical systems `X_{t+1} = Π(f(X_t) + γ e(X_t, ε_{t+1}))`.
//!
//! A [`SystemSpec`] bundles the drift `f`, the noise gain `e`, the law of the
//! draws `ε`, an optional projection `Π` and an optional indicator of the
//! discontinuity set of `f`. All callables are shared behind `Arc` so a spec
//! can be cloned cheaply and handed to concurrent workers.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, tags, NoiseLaw};

/// `x -> f(x)`, written into the output slice.
pub type VectorMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(x, y) -> e(x, y)`, written into the output slice.
pub type NoiseGain = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type Indicator = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SystemSpec {
    dim: usize,
    noise_dim: usize,
    drift: VectorMap,
    gain: NoiseGain,
    noise: NoiseLaw,
    projection: Option<VectorMap>,
    discontinuity: Option<Indicator>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("noise", &self.noise)
            .field("projection", &self.projection.is_some())
            .field("discontinuity", &self.discontinuity.is_some())
            .finish()
    }
}

impl SystemSpec {
    /// A system with additive noise `e(x, y) = y` and standard gaussian draws.
    pub fn new(dim: usize, drift: VectorMap) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            noise_dim: dim,
            drift,
            gain: Arc::new(|_x, y, out| out.copy_from_slice(y)),
            noise: NoiseLaw::Gaussian,
            projection: None,
            discontinuity: None,
        }
    }

    pub fn from_fn<F>(dim: usize, drift: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::new(dim, Arc::new(drift))
    }

    pub fn with_noise(mut self, noise: NoiseLaw) -> Self {
        self.noise = noise;
        self
    }

    /// Replaces the additive gain by a general `e: R^d × R^p -> R^d`.
    pub fn with_gain(mut self, noise_dim: usize, gain: NoiseGain) -> Self {
        self.noise_dim = noise_dim;
        self.gain = gain;
        self
    }

    pub fn with_projection(mut self, projection: VectorMap) -> Self {
        self.projection = Some(projection);
        self
    }

    pub fn with_discontinuity(mut self, indicator: Indicator) -> Self {
        self.discontinuity = Some(indicator);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn noise(&self) -> &NoiseLaw {
        &self.noise
    }

    pub fn drift_map(&self) -> &VectorMap {
        &self.drift
    }

    pub fn discontinuity(&self) -> Option<&Indicator> {
        self.discontinuity.as_ref()
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.drift)(x, &mut out);
        out
    }

    pub fn gain(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.gain)(x, y, &mut out);
        out
    }

    pub fn project(&self, x: &mut [f64]) {
        if let Some(p) = &self.projection {
            let src = x.to_vec();
            p(&src, x);
        }
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.noise.sample(rng, out);
    }

    /// One step without the finiteness check; `scratch` must hold `dim` values.
    pub(crate) fn step_into(&self, x: &[f64], gamma: f64, y: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        (self.drift)(x, out);
        self.perturb_into(x, gamma, y, out, scratch);
    }

    /// Noise and projection applied to `out = f(x)`, in place.
    pub(crate) fn perturb_into(&self, x: &[f64], gamma: f64, y: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        if gamma != 0.0 {
            (self.gain)(x, y, scratch);
            for (o, e) in out.iter_mut().zip(scratch.iter()) {
                *o += gamma * e;
            }
        }
        if let Some(p) = &self.projection {
            scratch.copy_from_slice(out);
            p(scratch, out);
        }
    }

    /// `Π(f(x) + γ e(x, y))` for an explicit noise draw `y`.
    pub fn step(&self, x: &[f64], gamma: f64, y: &[f64]) -> Result<Vec<f64>> {
        check_gamma(gamma)?;
        self.check_dim(x.len())?;
        if y.len() != self.noise_dim {
            return Err(Error::DimensionMismatch { expected: self.noise_dim, got: y.len() });
        }
        let mut out = vec![0.0; self.dim];
        let mut scratch = vec![0.0; self.dim];
        self.step_into(x, gamma, y, &mut out, &mut scratch);
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonFiniteState { chain: None, step: 1, state: out })
        }
    }

    /// Runs `horizon` steps from `x0` with draws from `rng`, calling
    /// `visit(t, state)` for every state including `t = 0`.
    pub fn drive<R, V>(&self, x0: &[f64], gamma: f64, horizon: usize, rng: &mut R, mut visit: V) -> Result<()>
    where
        R: Rng + ?Sized,
        V: FnMut(usize, &[f64]),
    {
        check_gamma(gamma)?;
        self.check_dim(x0.len())?;
        let mut x = x0.to_vec();
        let mut next = vec![0.0; self.dim];
        let mut scratch = vec![0.0; self.dim];
        let mut y = vec![0.0; self.noise_dim];
        visit(0, &x);
        for t in 1..=horizon {
            self.noise.sample(rng, &mut y);
            self.step_into(&x, gamma, &y, &mut next, &mut scratch);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState { chain: None, step: t, state: next });
            }
            std::mem::swap(&mut x, &mut next);
            visit(t, &x);
        }
        Ok(())
    }

    /// Seeded trajectory of length `horizon + 1`.
    pub fn simulate(&self, x0: &[f64], gamma: f64, horizon: usize, seed: u64) -> Result<Trajectory> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        let mut states = Vec::with_capacity(horizon + 1);
        let mut rng = rng::stream(seed, &[tags::CHAIN, 0]);
        self.drive(x0, gamma, horizon, &mut rng, |_, x| states.push(x.to_vec()))?;
        Ok(Trajectory { gamma, states, seed })
    }

    /// Monte-Carlo estimate of `P^γ g(x) = E g(Π(f(x) + γ e(x, ε)))`.
    pub fn transition_mean<G>(&self, g: G, x: &[f64], gamma: f64, n_samples: usize, seed: u64) -> Result<McEstimate>
    where
        G: Fn(&[f64]) -> f64,
    {
        let mut rng = rng::stream(seed, &[tags::KERNEL]);
        self.transition_mean_with(&g, x, gamma, n_samples, &mut rng)
    }

    pub(crate) fn transition_mean_with<G, R>(
        &self,
        g: &G,
        x: &[f64],
        gamma: f64,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<McEstimate>
    where
        G: Fn(&[f64]) -> f64 + ?Sized,
        R: Rng + ?Sized,
    {
        check_gamma(gamma)?;
        self.check_dim(x.len())?;
        if n_samples < 2 {
            return Err(Error::InvalidArgument("transition_mean needs at least 2 samples".into()));
        }
        if gamma == 0.0 {
            // Degenerate kernel: P^0 g = g∘Π∘f, no sampling error.
            let mut fx = self.drift(x);
            self.project(&mut fx);
            let v = g(&fx);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { index: 0 });
            }
            return Ok(McEstimate { estimate: v, standard_error: 0.0 });
        }
        let mut out = vec![0.0; self.dim];
        let mut scratch = vec![0.0; self.dim];
        let mut y = vec![0.0; self.noise_dim];
        let mut acc = Welford::default();
        for i in 0..n_samples {
            self.noise.sample(rng, &mut y);
            self.step_into(x, gamma, &y, &mut out, &mut scratch);
            let v = g(&out);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { index: i });
            }
            acc.push(v);
        }
        Ok(acc.estimate())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, got })
        }
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be finite and nonnegative, got {gamma}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub gamma: f64,
    pub states: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn estimate(&self) -> McEstimate {
        let se = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate { estimate: self.mean, standard_error: se }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(a: f64, b: f64) -> SystemSpec {
        SystemSpec::from_fn(1, move |x, out| out[0] = a * x[0] + b)
    }

    #[test]
    fn step_is_drift_plus_scaled_gain() {
        let spec = affine(0.5, 1.0);
        let out = spec.step(&[2.0], 0.1, &[3.0]).unwrap();
        assert_eq!(out, vec![0.5 * 2.0 + 1.0 + 0.1 * 3.0]);
    }

    #[test]
    fn projection_applies_after_step() {
        let spec = affine(1.0, 0.0).with_projection(Arc::new(|x, out| out[0] = x[0].clamp(0.0, 1.0)));
        assert_eq!(spec.step(&[0.8], 0.1, &[5.0]).unwrap(), vec![1.0]);
        assert_eq!(spec.step(&[0.2], 0.1, &[-5.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn blow_up_is_reported_with_index() {
        let spec = affine(1e200, 0.0).with_noise(NoiseLaw::Zero);
        let err = spec.simulate(&[1.0], 0.1, 10, 0).unwrap_err();
        match err {
            Error::NonFiniteState { step, .. } => assert_eq!(step, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_gamma_rejected() {
        assert!(affine(1.0, 0.0).step(&[0.0], -0.1, &[0.0]).is_err());
        assert!(affine(1.0, 0.0).simulate(&[0.0], 0.1, 0, 0).is_err());
    }

    #[test]
    fn zero_noise_reproduces_deterministic_orbit() {
        let spec = affine(0.5, 1.0).with_noise(NoiseLaw::Zero);
        let traj = spec.simulate(&[4.0], 0.3, 5, 11).unwrap();
        let mut x = 4.0;
        for s in &traj.states {
            assert_eq!(s[0], x);
            x = 0.5 * x + 1.0;
        }
    }

    #[test]
    fn transition_mean_of_constant_has_no_error() {
        let spec = affine(0.5, 0.0);
        let est = spec.transition_mean(|_| 3.5, &[1.0], 0.2, 100, 5).unwrap();
        assert_eq!(est.estimate, 3.5);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn transition_mean_reports_non_finite_draw() {
        let spec = affine(0.5, 0.0);
        let err = spec
            .transition_mean(|x| if x[0] > 0.0 { f64::NAN } else { 0.0 }, &[1.0], 0.1, 10, 0)
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { index: 0 }));
    }
}
