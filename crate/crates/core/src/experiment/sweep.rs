use rayon::prelude::*;
use rayon::ThreadPoolBuilder;

use super::config::Plan;
use super::Verdict;
use crate::dynamics::McEstimate;
use crate::equilibria::{
    classify, find_fixed_points, noise_excitation, saddle_gap_matrix, unstable_projector, Classification, Stability,
    DEGENERACY_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{distance, fd_jacobian};
use crate::lyapunov::{expansion_lhs, expansion_rhs};
use crate::measure::{estimate_invariant, integrate, localization_report, weak_distance, EmpiricalMeasure};
use crate::rng::{child_seed, tags};

/// Roots this close to a known fixed point are reported at the known location.
const SNAP_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCell {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Bootstrap standard error of `lhs`.
    pub se: f64,
}

/// One gamma of a sweep. Statistics are NaN when the row failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub nu_v: f64,
    pub masses: Vec<f64>,
    pub total_mass: f64,
    /// Weak distance to the previous gamma's measure.
    pub w1_prev: f64,
    pub expansion: Option<ExpansionCell>,
    pub error: Option<String>,
    /// `pass`, `fail`, `failed` (row error) or `-` (no claim applies).
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointRow {
    pub location: Vec<f64>,
    pub residual: f64,
    pub classification: Option<Classification>,
    pub saddle_gap: f64,
    pub unstable_dim: Option<usize>,
    pub excitation: Option<McEstimate>,
    pub stability: Option<Stability>,
    /// Why a column is missing, empty otherwise.
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub model: String,
    pub fixed_points: Vec<Vec<f64>>,
    pub rows: Vec<SweepRow>,
    pub fixed_point_reports: Vec<FixedPointRow>,
    pub verdicts: Vec<Verdict>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    let pool = ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Runs every gamma of the plan on `workers` threads. The result does not
/// depend on `workers`.
pub fn run_sweep(plan: &Plan, workers: usize) -> Result<SweepReport> {
    let w = plan.build_test_function()?;
    with_workers(workers, || {
        let spec = plan.card.system_with(plan.noise.clone());
        let measures: Vec<Result<EmpiricalMeasure>> =
            plan.gamma_grid.par_iter().map(|g| estimate_invariant(&spec, *g, &plan.estimation)).collect();
        let v = plan.card.lyapunov.as_ref();
        let k = plan.fixed_points.len();
        let mut rows = Vec::with_capacity(measures.len());
        let mut prev: Option<&EmpiricalMeasure> = None;
        for (i, (gamma, m)) in plan.gamma_grid.iter().zip(&measures).enumerate() {
            let row = m.as_ref().map_err(|e| e.to_string()).and_then(|m| {
                let loc = localization_report(m, &plan.fixed_points, plan.radius).map_err(|e| e.to_string())?;
                let nu_v = match v {
                    Some(v) => integrate(m, v.value_fn().as_ref()).map_err(|e| e.to_string())?,
                    None => f64::NAN,
                };
                let w1_prev = match prev {
                    Some(p) => weak_distance(p, m).map_err(|e| e.to_string())?,
                    None => f64::NAN,
                };
                let expansion = match &w {
                    Some(w) => {
                        let lhs = expansion_lhs(m, w, spec.drift_map().as_ref(), child_seed(plan.seed(), &[tags::SWEEP, i as u64]))
                            .map_err(|e| e.to_string())?;
                        let masses: Vec<(Vec<f64>, f64)> =
                            plan.fixed_points.iter().cloned().zip(loc.masses.iter().copied()).collect();
                        let rhs = expansion_rhs(&spec, w, &masses, plan.rhs_samples(), child_seed(plan.seed(), &[tags::EXPANSION]))
                            .map_err(|e| e.to_string())?;
                        Some(ExpansionCell {
                            lhs: lhs.estimate,
                            rhs: rhs.estimate,
                            ratio: lhs.estimate / rhs.estimate,
                            se: lhs.standard_error,
                        })
                    }
                    None => None,
                };
                Ok(SweepRow {
                    gamma: *gamma,
                    nu_v,
                    masses: loc.masses,
                    total_mass: loc.total,
                    w1_prev,
                    expansion,
                    error: None,
                    verdict: String::new(),
                })
            });
            let row = row.unwrap_or_else(|e| SweepRow {
                gamma: *gamma,
                nu_v: f64::NAN,
                masses: vec![f64::NAN; k],
                total_mass: f64::NAN,
                w1_prev: f64::NAN,
                expansion: None,
                error: Some(e),
                verdict: String::new(),
            });
            prev = m.as_ref().ok();
            rows.push(row);
        }
        let verdicts: Vec<Verdict> = plan.claims.iter().map(|c| c.evaluate(&rows)).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            let outcomes: Vec<bool> = verdicts.iter().filter_map(|v| v.rows[i]).collect();
            row.verdict = if row.error.is_some() {
                "failed".into()
            } else if outcomes.is_empty() {
                "-".into()
            } else if outcomes.iter().all(|o| *o) {
                "pass".into()
            } else {
                "fail".into()
            };
        }
        let fixed_point_reports = analyze_points(plan, &plan.fixed_points);
        SweepReport {
            model: plan.card.name.clone(),
            fixed_points: plan.fixed_points.clone(),
            rows,
            fixed_point_reports,
            verdicts,
        }
    })
}

/// Fixed points found by multistart Newton in the search box, merged with the
/// card's known ones, each with its diagnostics.
pub fn run_fixed_points(plan: &Plan, workers: usize) -> Result<Vec<FixedPointRow>> {
    with_workers(workers, || {
        let spec = plan.card.system_with(plan.noise.clone());
        let found =
            find_fixed_points(spec.drift_map().as_ref(), &plan.search_box, plan.search_starts, plan.search_tol, plan.seed());
        // known points win over nearby numerical roots
        let mut points = plan.fixed_points.clone();
        for p in found {
            if points.iter().all(|q| distance(&p, q) > SNAP_DISTANCE) {
                points.push(p.iter().map(|v| v + 0.0).collect());
            }
        }
        points.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        analyze_points(plan, &points)
    })
}

fn analyze_points(plan: &Plan, points: &[Vec<f64>]) -> Vec<FixedPointRow> {
    let spec = plan.card.system_with(plan.noise.clone());
    let drift = spec.drift_map();
    let v = plan.card.lyapunov.as_ref();
    points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut notes = Vec::new();
            let residual = distance(&spec.drift(x), x);
            let jac = fd_jacobian(drift.as_ref(), x, x.len());
            let classification = v.and_then(|v| match classify(v, x, DEGENERACY_TOL) {
                Ok(c) => Some(c),
                Err(e) => {
                    notes.push(e.to_string());
                    None
                }
            });
            let saddle_gap = v.map_or(f64::NAN, |v| saddle_gap_matrix(&v.hessian(x), &jac));
            let (unstable_dim, excitation) = match unstable_projector(&jac, 1.0) {
                Ok((p, k)) => {
                    let seed = child_seed(plan.seed(), &[tags::EXCITATION, i as u64]);
                    match noise_excitation(&spec, x, &p, plan.excitation_samples, seed) {
                        Ok(e) => (Some(k), Some(e)),
                        Err(e) => {
                            notes.push(e.to_string());
                            (Some(k), None)
                        }
                    }
                }
                Err(e) => {
                    notes.push(e.to_string());
                    (None, None)
                }
            };
            if v.is_none() {
                notes.push("no Lyapunov function".into());
            }
            FixedPointRow {
                location: x.clone(),
                residual,
                classification,
                saddle_gap,
                unstable_dim,
                excitation,
                stability: unstable_dim.map(|k| if k > 0 { Stability::Unstable } else { Stability::Stable }),
                note: notes.join("; "),
            }
        })
        .collect()
}

/// Expansion columns of a sweep; fails if no test function is configured.
pub fn run_expansion(plan: &Plan, workers: usize) -> Result<SweepReport> {
    if plan.test_function.is_none() {
        return Err(Error::Precondition("no test function configured".into()));
    }
    run_sweep(plan, workers)
}
