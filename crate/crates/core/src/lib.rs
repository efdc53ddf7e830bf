//! Simulation and analysis toolkit for small-noise perturbations of
//! discrete-time dynamical systems `X ↦ Π(f(X) + γ e(X, ε))`.
//!
//! * [`dynamics`]: system specification, one-step kernel and trajectories.
//! * [`measure`]: multi-chain estimates of invariant measures and statistics on them.
//! * [`equilibria`]: fixed points, classification, saddle gaps and unstable projectors.
//! * [`lyapunov`]: bounded test functions and drift / expansion diagnostics.
//! * [`zoo`]: ready-made example systems.
//! * [`quantizer`]: Lloyd's algorithm viewed as a dynamical system.
//! * [`experiment`]: configuration-driven sweeps and reports.

pub mod dynamics;
pub mod equilibria;
pub mod experiment;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod measure;
pub mod quantizer;
pub mod region;
pub mod rng;
pub mod zoo;

pub use dynamics::{McEstimate, SystemSpec, Trajectory};
pub use error::{Error, Result};
pub use lyapunov::LyapunovSpec;
pub use measure::EmpiricalMeasure;
pub use region::BoxRegion;
pub use rng::NoiseLaw;
