//! Config-driven sweeps over the step size, with named pass/fail claims.
//!
//! A run resolves an [`ExperimentConfig`] against its model card into a
//! [`Plan`], then writes CSV tables (and optionally an SVG plot) to an output
//! directory. Every table is a deterministic function of the config.

mod claims;
mod config;
mod output;
mod sweep;

use std::fs;
use std::path::Path;

pub use claims::{Claim, Verdict};
pub use config::{Command, ExperimentConfig, Plan, TestFunctionConfig, SCHEMA_VERSION};
pub use output::{
    sweep_svg, write_expansion_csv, write_fixed_points_csv, write_sweep_csv, write_sweep_svg, write_verdicts_csv,
};
pub use sweep::{run_expansion, run_fixed_points, run_sweep, ExpansionCell, FixedPointRow, SweepReport, SweepRow};

use crate::error::Result;

/// Writes `sweep.csv`, `verdicts.csv`, `fixed_points.csv`, the resolved
/// `config.json` and, if asked, `sweep.svg`.
pub fn write_sweep_outputs(dir: &Path, plan: &Plan, report: &SweepReport, svg: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_sweep_csv(&dir.join("sweep.csv"), report)?;
    write_verdicts_csv(&dir.join("verdicts.csv"), &report.verdicts)?;
    write_fixed_points_csv(&dir.join("fixed_points.csv"), &report.fixed_point_reports)?;
    write_config(dir, plan)?;
    if svg {
        write_sweep_svg(&dir.join("sweep.svg"), report)?;
    }
    Ok(())
}

/// Writes `expansion.csv`, `verdicts.csv` and the resolved `config.json`.
pub fn write_expansion_outputs(dir: &Path, plan: &Plan, report: &SweepReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_expansion_csv(&dir.join("expansion.csv"), report)?;
    write_verdicts_csv(&dir.join("verdicts.csv"), &report.verdicts)?;
    write_config(dir, plan)
}

pub fn write_fixed_point_outputs(dir: &Path, plan: &Plan, rows: &[FixedPointRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_fixed_points_csv(&dir.join("fixed_points.csv"), rows)?;
    write_config(dir, plan)
}

fn write_config(dir: &Path, plan: &Plan) -> Result<()> {
    let mut text = plan.resolved_config().to_json();
    text.push('\n');
    fs::write(dir.join("config.json"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(model: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_model(model);
        c.gamma_grid = Some(vec![0.2, 0.1]);
        c.chains = Some(3);
        c.horizon = Some(2_000);
        c.seed = 11;
        c
    }

    #[test]
    fn sweep_has_one_row_per_gamma_and_is_worker_independent() {
        let plan = small("double_well").resolve(Command::Sweep).unwrap();
        let a = run_sweep(&plan, 1).unwrap();
        let b = run_sweep(&plan, 3).unwrap();
        assert_eq!(format!("{:?}", a.rows), format!("{:?}", b.rows));
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.fixed_point_reports.len(), 3);
        assert!(a.rows[0].w1_prev.is_nan() && a.rows[1].w1_prev.is_finite());
        assert!(a.rows.iter().all(|r| r.expansion.is_none() && r.verdict != "failed"));
    }

    #[test]
    fn constant_test_function_gives_zero_lhs() {
        let mut c = small("double_well");
        c.test_function = Some(TestFunctionConfig { constant: Some(0.7), ..Default::default() });
        let plan = c.resolve(Command::Expansion).unwrap();
        let r = run_expansion(&plan, 1).unwrap();
        for row in &r.rows {
            let e = row.expansion.as_ref().unwrap();
            assert_eq!((e.lhs, e.rhs), (0.0, 0.0));
        }
    }

    #[test]
    fn blow_up_marks_the_row_and_continues() {
        // the quartic flow explodes once the noise throws a chain far out
        let mut c = small("double_well");
        c.gamma_grid = Some(vec![1e200, 0.1]);
        let plan = c.resolve(Command::Sweep).unwrap();
        let r = run_sweep(&plan, 1).unwrap();
        assert_eq!(r.rows[0].verdict, "failed");
        assert!(r.rows[0].error.is_some());
        assert!(r.rows[1].error.is_none());
        assert!(!r.passed());
    }

    #[test]
    fn fixed_points_of_the_double_well() {
        let plan = ExperimentConfig::for_model("double_well").resolve(Command::FixedPoints).unwrap();
        let rows = run_fixed_points(&plan, 1).unwrap();
        assert_eq!(rows.len(), 3);
        let stab: Vec<_> = rows.iter().map(|r| r.stability.map(|s| s.as_str())).collect();
        assert_eq!(stab, vec![Some("stable"), Some("unstable"), Some("stable")]);
    }

    #[test]
    fn outputs_land_in_the_directory() {
        let plan = small("coordination_game").resolve(Command::Sweep).unwrap();
        let r = run_sweep(&plan, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_sweep_outputs(dir.path(), &plan, &r, true).unwrap();
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert!(csv.starts_with(
            "gamma,nu_V,mass_fp_1,mass_fp_2,mass_fp_3,total_mass,w1_prev,exp_lhs,exp_rhs,exp_ratio,verdict\n"
        ));
        assert_eq!(csv.lines().count(), 3);
        assert!(fs::read_to_string(dir.path().join("sweep.svg")).unwrap().starts_with("<svg"));
        let cfg = ExperimentConfig::load(&dir.path().join("config.json")).unwrap();
        assert_eq!(cfg.resolve(Command::Sweep).unwrap().gamma_grid, plan.gamma_grid);
    }
}
