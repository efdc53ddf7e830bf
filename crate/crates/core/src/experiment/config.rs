use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::claims::Claim;
use crate::error::{Error, Result};
use crate::linalg::distance;
use crate::lyapunov::{build_symmetric_pair_test_function, build_test_function, TestFunction, TestFunctionOptions};
use crate::measure::EstimationOptions;
use crate::region::BoxRegion;
use crate::rng::NoiseLaw;
use crate::zoo::{make_model, ModelCard, ModelParams};

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_SEARCH_STARTS: usize = 64;
const DEFAULT_SEARCH_TOL: f64 = 1e-10;
const DEFAULT_EXCITATION_SAMPLES: usize = 100_000;
const DEFAULT_RHS_SAMPLES: usize = 100_000;

/// One experiment as a JSON document. Unset fields take the model card's
/// defaults; [`Plan::resolved_config`] spells every field out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: String,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinning: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_box: Option<BoxRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_box: Option<BoxRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation_samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunctionConfig>,
    /// `None` picks the default claims of the model and command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claims: Option<Vec<Claim>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionConfig {
    /// One strict maximum of `V` or a symmetric pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blend_width: Option<f64>,
    /// Debug override: use `W ≡ constant` instead of building from `V`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FixedPoints,
    Sweep,
    Expansion,
}

impl ExperimentConfig {
    /// Minimal config for `model`; everything else from the card.
    pub fn for_model(model: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: model.into(),
            params: ModelParams::default(),
            noise: None,
            gamma_grid: None,
            chains: None,
            burn_in: None,
            horizon: None,
            thinning: None,
            radius: None,
            init_box: None,
            search_box: None,
            search_starts: None,
            search_tol: None,
            excitation_samples: None,
            seed: 0,
            out_dir: None,
            test_function: None,
            claims: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates against the model card and fills in every default.
    pub fn resolve(&self, command: Command) -> Result<Plan> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported schema_version {}", self.schema_version)));
        }
        let card = make_model(&self.model, &self.params)?;
        let d = &card.defaults;
        let gamma_grid = self.gamma_grid.clone().unwrap_or_else(|| d.gamma_grid.clone());
        check_grid(&gamma_grid)?;
        let horizon = self.horizon.unwrap_or(d.horizon);
        let burn_in = self.burn_in.unwrap_or(if self.horizon.is_some() { horizon / 10 } else { d.burn_in });
        let init_box = self.init_box.clone().unwrap_or_else(|| d.init_box.clone());
        let search_box = self.search_box.clone().unwrap_or_else(|| d.search_box.clone());
        for b in [&init_box, &search_box] {
            if b.dim() != card.dim {
                return Err(Error::DimensionMismatch { expected: card.dim, got: b.dim() });
            }
        }
        let mut estimation = EstimationOptions::new(horizon, init_box, self.seed)
            .chains(self.chains.unwrap_or(d.chains))
            .burn_in(burn_in);
        if let Some(t) = self.thinning {
            estimation = estimation.thinning(t);
        }
        estimation.validate()?;

        let radius = self.radius.unwrap_or(d.radius);
        let fixed_points = card.fixed_point_locations();
        check_radius(&fixed_points, radius)?;

        let search_starts = self.search_starts.unwrap_or(DEFAULT_SEARCH_STARTS);
        let search_tol = self.search_tol.unwrap_or(DEFAULT_SEARCH_TOL);
        if search_starts == 0 || !(search_tol > 0.0) {
            return Err(Error::InvalidArgument("search_starts and search_tol must be positive".into()));
        }
        let excitation_samples = self.excitation_samples.unwrap_or(DEFAULT_EXCITATION_SAMPLES);
        if excitation_samples < 2 {
            return Err(Error::InvalidArgument("excitation_samples must be at least 2".into()));
        }

        let test_function = match (&self.test_function, command) {
            (Some(tf), _) => Some(tf.clone()),
            (None, Command::Expansion) => Some(TestFunctionConfig::default()),
            (None, _) => None,
        };
        if let Some(tf) = &test_function {
            if tf.rhs_samples.is_some_and(|n| n < 2) {
                return Err(Error::InvalidArgument("rhs_samples must be at least 2".into()));
            }
        }

        let claims = self.claims.clone().unwrap_or_else(|| Claim::defaults(&self.model, command));
        for c in &claims {
            c.validate(fixed_points.len())?;
        }

        Ok(Plan {
            config: self.clone(),
            noise: self.noise.clone().unwrap_or_else(|| d.noise.clone()),
            card,
            gamma_grid,
            estimation,
            radius,
            search_box,
            search_starts,
            search_tol,
            excitation_samples,
            fixed_points,
            test_function,
            claims,
        })
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("gamma_grid is empty".into()));
    }
    if grid.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::InvalidArgument(format!("gamma_grid must be positive, got {grid:?}")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(format!("gamma_grid must be strictly decreasing, got {grid:?}")));
    }
    Ok(())
}

fn check_radius(points: &[Vec<f64>], radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate().skip(i + 1) {
            let d = distance(p, q);
            if d <= 2.0 * radius {
                return Err(Error::OverlappingBalls { first: i, second: j, distance: d, radius });
            }
        }
    }
    Ok(())
}

/// A validated config with every default filled in.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub card: ModelCard,
    pub noise: NoiseLaw,
    pub gamma_grid: Vec<f64>,
    pub estimation: EstimationOptions,
    pub radius: f64,
    pub search_box: BoxRegion,
    pub search_starts: usize,
    pub search_tol: f64,
    pub excitation_samples: usize,
    /// The card's known fixed points, in card order (`mass_fp_1..k`).
    pub fixed_points: Vec<Vec<f64>>,
    pub test_function: Option<TestFunctionConfig>,
    pub claims: Vec<Claim>,
}

impl Plan {
    pub fn seed(&self) -> u64 {
        self.estimation.seed
    }

    pub fn rhs_samples(&self) -> usize {
        self.test_function.as_ref().and_then(|t| t.rhs_samples).unwrap_or(DEFAULT_RHS_SAMPLES)
    }

    /// The configured test function, if any.
    pub fn build_test_function(&self) -> Result<Option<TestFunction>> {
        let Some(tf) = &self.test_function else { return Ok(None) };
        if let Some(c) = tf.constant {
            return Ok(Some(TestFunction::constant(self.card.dim, c)));
        }
        let v = self.card.lyapunov()?;
        let targets = tf.targets.clone().unwrap_or_else(|| self.card.defaults.targets.clone());
        let cap = tf.cap.unwrap_or(self.card.defaults.cap);
        let others: Vec<Vec<f64>> =
            self.fixed_points.iter().filter(|p| !targets.iter().any(|t| distance(t, p) < 1e-9)).cloned().collect();
        let opts = TestFunctionOptions { blend_width: tf.blend_width, ..TestFunctionOptions::default() };
        let w = match targets.as_slice() {
            [] => {
                return Err(Error::Precondition(format!("model `{}` has no strict local max to target", self.card.name)))
            }
            [x] => build_test_function(v, x, &others, cap, &opts)?,
            [p, q] => build_symmetric_pair_test_function(v, (p, q), &others, cap, &opts)?,
            _ => return Err(Error::InvalidArgument("at most two test-function targets".into())),
        };
        Ok(Some(w))
    }

    /// The input config with every default written out.
    pub fn resolved_config(&self) -> ExperimentConfig {
        let mut c = self.config.clone();
        c.noise = Some(self.noise.clone());
        c.gamma_grid = Some(self.gamma_grid.clone());
        c.chains = Some(self.estimation.chains);
        c.burn_in = Some(self.estimation.burn_in);
        c.horizon = Some(self.estimation.horizon);
        c.thinning = Some(self.estimation.effective_thinning());
        c.radius = Some(self.radius);
        c.init_box = Some(self.estimation.init_box.clone());
        c.search_box = Some(self.search_box.clone());
        c.search_starts = Some(self.search_starts);
        c.search_tol = Some(self.search_tol);
        c.excitation_samples = Some(self.excitation_samples);
        c.test_function = self.test_function.clone();
        c.claims = Some(self.claims.clone());
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_come_from_the_card() {
        let plan = ExperimentConfig::for_model("double_well").resolve(Command::Sweep).unwrap();
        assert_eq!(plan.gamma_grid, vec![0.2, 0.1, 0.05, 0.02]);
        assert_eq!((plan.estimation.chains, plan.estimation.horizon, plan.estimation.burn_in), (8, 1_000_000, 100_000));
        assert_eq!(plan.fixed_points.len(), 3);
        assert!(plan.test_function.is_none());
        assert!(!plan.claims.is_empty());
    }

    #[test]
    fn validation_failures() {
        let mut c = ExperimentConfig::for_model("double_well");
        c.gamma_grid = Some(vec![0.1, 0.2]);
        assert!(c.resolve(Command::Sweep).is_err());
        c.gamma_grid = Some(vec![0.1, 0.0]);
        assert!(c.resolve(Command::Sweep).is_err());
        c.gamma_grid = None;
        c.horizon = Some(100);
        c.burn_in = Some(100);
        assert!(c.resolve(Command::Sweep).is_err());
        c.burn_in = None;
        c.radius = Some(0.5);
        assert!(matches!(c.resolve(Command::Sweep), Err(Error::OverlappingBalls { .. })));
        assert!(ExperimentConfig::for_model("nope").resolve(Command::Sweep).is_err());
    }

    #[test]
    fn json_round_trip_and_schema_check() {
        let text = r#"{"schema_version": 1, "model": "lemniscate", "params": {"theta_scale": 2.0},
            "gamma_grid": [0.1, 0.05], "seed": 7, "claims": []}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.params.theta_scale, Some(2.0));
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        assert!(ExperimentConfig::from_json(r#"{"schema_version": 2, "model": "tent_map"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema_version": 1, "model": "tent_map", "bogus": 1}"#).is_err());
    }

    #[test]
    fn expansion_falls_back_to_card_targets() {
        let plan = ExperimentConfig::for_model("double_well").resolve(Command::Expansion).unwrap();
        let w = plan.build_test_function().unwrap().unwrap();
        assert_eq!(w.targets(), &[vec![0.0]]);
        let tent = ExperimentConfig::for_model("tent_map").resolve(Command::Expansion).unwrap();
        assert!(tent.build_test_function().is_err());
    }
}
