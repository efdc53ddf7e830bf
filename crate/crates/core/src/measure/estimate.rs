use rayon::prelude::*;

use super::{integrate, EmpiricalMeasure, MeasureMeta};
use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};
use crate::region::BoxRegion;
use crate::rng::{self, tags};

/// Cap on retained samples per measure when thinning is automatic.
pub const DEFAULT_MAX_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationOptions {
    pub chains: usize,
    pub burn_in: usize,
    pub horizon: usize,
    /// `None` picks the smallest thinning keeping at most `max_samples`.
    pub thinning: Option<usize>,
    pub max_samples: usize,
    pub init_box: BoxRegion,
    pub seed: u64,
}

impl EstimationOptions {
    /// Eight chains, burn-in a tenth of the horizon, automatic thinning.
    pub fn new(horizon: usize, init_box: BoxRegion, seed: u64) -> Self {
        Self {
            chains: 8,
            burn_in: horizon / 10,
            horizon,
            thinning: None,
            max_samples: DEFAULT_MAX_SAMPLES,
            init_box,
            seed,
        }
    }

    pub fn chains(mut self, chains: usize) -> Self {
        self.chains = chains;
        self
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn thinning(mut self, thinning: usize) -> Self {
        self.thinning = Some(thinning);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidArgument("at least one chain is required".into()));
        }
        if self.horizon <= self.burn_in {
            return Err(Error::InvalidArgument(format!(
                "horizon {} must exceed burn-in {}",
                self.horizon, self.burn_in
            )));
        }
        if self.thinning == Some(0) {
            return Err(Error::InvalidArgument("thinning must be at least 1".into()));
        }
        if self.max_samples == 0 {
            return Err(Error::InvalidArgument("max_samples must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_thinning(&self) -> usize {
        self.thinning.unwrap_or_else(|| {
            let total = self.chains * (self.horizon - self.burn_in);
            total.div_ceil(self.max_samples).max(1)
        })
    }
}

/// Pools `chains` independent runs after burn-in, keeping every
/// `thinning`-th state, with equal weights.
///
/// Chain `c` starts from a uniform draw in `init_box` and uses its own stream,
/// so the result does not depend on how chains are scheduled.
pub fn estimate_invariant(spec: &SystemSpec, gamma: f64, opts: &EstimationOptions) -> Result<EmpiricalMeasure> {
    opts.validate()?;
    if opts.init_box.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: opts.init_box.dim() });
    }
    let thinning = opts.effective_thinning();
    let per_chain = (opts.horizon - opts.burn_in) / thinning;
    if per_chain == 0 {
        return Err(Error::EmptyMeasure);
    }
    let dim = spec.dim();
    let chains: Vec<Vec<f64>> = (0..opts.chains)
        .into_par_iter()
        .map(|c| {
            let mut init_rng = rng::stream(opts.seed, &[tags::INIT, c as u64]);
            let x0 = opts.init_box.sample(&mut init_rng);
            let mut rng = rng::stream(opts.seed, &[tags::CHAIN, c as u64]);
            let mut kept = Vec::with_capacity(per_chain * dim);
            spec.drive(&x0, gamma, opts.horizon, &mut rng, |t, x| {
                if t > opts.burn_in && (t - opts.burn_in) % thinning == 0 {
                    kept.extend_from_slice(x);
                }
            })
            .map_err(|e| match e {
                Error::NonFiniteState { step, state, .. } => Error::NonFiniteState { chain: Some(c), step, state },
                other => other,
            })?;
            Ok(kept)
        })
        .collect::<Result<_>>()?;
    let meta = MeasureMeta {
        gamma,
        seed: opts.seed,
        chains: opts.chains,
        burn_in: opts.burn_in,
        horizon: opts.horizon,
        thinning,
    };
    EmpiricalMeasure::from_chains(dim, chains, meta)
}

/// `(γ, ν̂_γ(V))` for every step size of the grid.
///
/// Every grid point reuses the same seed, so the estimates are driven by
/// common random numbers.
pub fn moment_curve<V>(spec: &SystemSpec, v: V, gamma_grid: &[f64], opts: &EstimationOptions) -> Result<Vec<(f64, f64)>>
where
    V: Fn(&[f64]) -> f64 + Sync,
{
    if gamma_grid.is_empty() || gamma_grid.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidArgument("gamma grid must be nonempty and strictly positive".into()));
    }
    gamma_grid
        .par_iter()
        .map(|&gamma| {
            let m = estimate_invariant(spec, gamma, opts)?;
            Ok((gamma, integrate(&m, &v)?))
        })
        .collect()
}
