use serde::{Deserialize, Serialize};

use super::config::Command;
use super::sweep::SweepRow;
use crate::error::{Error, Result};

/// A named acceptance rule checked against the rows of a sweep.
///
/// Fixed points are numbered from 1 in card order, as in the `mass_fp_*`
/// columns. `gamma: None` means the smallest gamma of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Claim {
    /// Mass at `point` strictly decreases from each gamma to the next.
    MassDecreasing { point: usize },
    MassBelow {
        point: usize,
        threshold: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    /// Summed mass at `points` exceeds `threshold`.
    MassAbove {
        points: Vec<usize>,
        threshold: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    ExpansionRatioWithin {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    /// `lhs ≥ −sigmas · se` at every gamma.
    ExpansionLhsNonnegative { sigmas: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub claim: String,
    pub passed: bool,
    pub detail: String,
    /// Per-row outcome; `None` where the claim says nothing about the row.
    pub rows: Vec<Option<bool>>,
}

impl Claim {
    pub fn defaults(model: &str, command: Command) -> Vec<Claim> {
        use Claim::*;
        match command {
            Command::FixedPoints => Vec::new(),
            Command::Sweep => match model {
                "double_well" => vec![MassDecreasing { point: 2 }, MassBelow { point: 2, threshold: 0.01, gamma: None }],
                "coordination_game" => vec![
                    MassBelow { point: 2, threshold: 0.01, gamma: None },
                    MassAbove { points: vec![1, 3], threshold: 0.98, gamma: None },
                ],
                "quartic_saddle" => vec![MassBelow { point: 2, threshold: 0.02, gamma: None }],
                "lemniscate" => vec![MassAbove { points: vec![2], threshold: 0.9, gamma: None }],
                "contracting_borel" => vec![MassAbove { points: vec![1], threshold: 0.95, gamma: None }],
                "lloyd_1d" => vec![MassAbove { points: vec![1], threshold: 0.9, gamma: None }],
                _ => Vec::new(),
            },
            Command::Expansion => {
                let mut v = vec![ExpansionLhsNonnegative { sigmas: 3.0 }];
                if model == "double_well" {
                    v.push(ExpansionRatioWithin { lo: 0.8, hi: 1.2, gamma: None });
                }
                v
            }
        }
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        let check = |p: usize| {
            if p == 0 || p > n_points {
                Err(Error::InvalidArgument(format!("claim refers to fixed point {p}, model has {n_points}")))
            } else {
                Ok(())
            }
        };
        match self {
            Claim::MassDecreasing { point } | Claim::MassBelow { point, .. } => check(*point),
            Claim::MassAbove { points, .. } => {
                if points.is_empty() {
                    return Err(Error::InvalidArgument("mass_above needs at least one point".into()));
                }
                points.iter().try_for_each(|p| check(*p))
            }
            Claim::ExpansionRatioWithin { lo, hi, .. } if !(lo <= hi) => {
                Err(Error::InvalidArgument(format!("empty ratio interval [{lo}, {hi}]")))
            }
            Claim::ExpansionLhsNonnegative { sigmas } if !(*sigmas >= 0.0) => {
                Err(Error::InvalidArgument(format!("sigmas must be nonnegative, got {sigmas}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        let at = |g: &Option<f64>| g.map_or_else(|| "min".to_string(), |g| g.to_string());
        match self {
            Claim::MassDecreasing { point } => format!("mass_decreasing(fp={point})"),
            Claim::MassBelow { point, threshold, gamma } => {
                format!("mass_below(fp={point};threshold={threshold};gamma={})", at(gamma))
            }
            Claim::MassAbove { points, threshold, gamma } => {
                let p: Vec<String> = points.iter().map(|p| p.to_string()).collect();
                format!("mass_above(fp={};threshold={threshold};gamma={})", p.join("+"), at(gamma))
            }
            Claim::ExpansionRatioWithin { lo, hi, gamma } => {
                format!("expansion_ratio_within(lo={lo};hi={hi};gamma={})", at(gamma))
            }
            Claim::ExpansionLhsNonnegative { sigmas } => format!("expansion_lhs_nonnegative(sigmas={sigmas})"),
        }
    }

    pub fn evaluate(&self, rows: &[SweepRow]) -> Verdict {
        let mut out = vec![None; rows.len()];
        let (passed, detail) = match self {
            Claim::MassDecreasing { point } => {
                let k = point - 1;
                if rows.len() < 2 {
                    (false, "needs at least two gammas".to_string())
                } else {
                    for i in 1..rows.len() {
                        out[i] = Some(rows[i].masses[k] < rows[i - 1].masses[k]);
                    }
                    let masses: Vec<String> = rows.iter().map(|r| r.masses[k].to_string()).collect();
                    (out.iter().all(|o| *o != Some(false)), format!("masses {}", masses.join(" > ")))
                }
            }
            Claim::MassBelow { point, threshold, gamma } => single(rows, gamma, &mut out, |r| {
                let m = r.masses[point - 1];
                (m < *threshold, format!("mass {m} at gamma {}", r.gamma))
            }),
            Claim::MassAbove { points, threshold, gamma } => single(rows, gamma, &mut out, |r| {
                let m: f64 = points.iter().map(|p| r.masses[p - 1]).sum();
                (m > *threshold, format!("mass {m} at gamma {}", r.gamma))
            }),
            Claim::ExpansionRatioWithin { lo, hi, gamma } => single(rows, gamma, &mut out, |r| match &r.expansion {
                Some(e) => ((*lo..=*hi).contains(&e.ratio), format!("ratio {} at gamma {}", e.ratio, r.gamma)),
                None => (false, "expansion not computed".to_string()),
            }),
            Claim::ExpansionLhsNonnegative { sigmas } => {
                let mut worst = String::new();
                for (i, r) in rows.iter().enumerate() {
                    let ok = r.expansion.as_ref().is_some_and(|e| e.lhs >= -sigmas * e.se);
                    out[i] = Some(ok);
                    if !ok && worst.is_empty() {
                        worst = format!("fails at gamma {}", r.gamma);
                    }
                }
                let ok = out.iter().all(|o| *o == Some(true));
                (ok, if ok { format!("{} gammas", rows.len()) } else { worst })
            }
        };
        Verdict { claim: self.name(), passed, detail, rows: out }
    }
}

fn single<F>(rows: &[SweepRow], gamma: &Option<f64>, out: &mut [Option<bool>], check: F) -> (bool, String)
where
    F: Fn(&SweepRow) -> (bool, String),
{
    let idx = match gamma {
        None => rows.len().checked_sub(1),
        Some(g) => rows.iter().position(|r| (r.gamma - g).abs() <= 1e-12 * g.abs()),
    };
    let Some(i) = idx else {
        return (false, format!("gamma {gamma:?} not in the grid"));
    };
    if let Some(e) = &rows[i].error {
        out[i] = Some(false);
        return (false, format!("row failed: {e}"));
    }
    let (ok, detail) = check(&rows[i]);
    out[i] = Some(ok);
    (ok, detail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::sweep::ExpansionCell;

    fn row(gamma: f64, masses: Vec<f64>) -> SweepRow {
        SweepRow {
            gamma,
            nu_v: 0.0,
            masses,
            total_mass: 1.0,
            w1_prev: f64::NAN,
            expansion: None,
            error: None,
            verdict: String::new(),
        }
    }

    #[test]
    fn decreasing_needs_strict_drop() {
        let c = Claim::MassDecreasing { point: 1 };
        let v = c.evaluate(&[row(0.2, vec![0.3]), row(0.1, vec![0.1]), row(0.05, vec![0.1])]);
        assert!(!v.passed);
        assert_eq!(v.rows, vec![None, Some(true), Some(false)]);
    }

    #[test]
    fn thresholds_default_to_smallest_gamma() {
        let rows = [row(0.2, vec![0.5, 0.2]), row(0.1, vec![0.6, 0.001])];
        assert!(Claim::MassBelow { point: 2, threshold: 0.01, gamma: None }.evaluate(&rows).passed);
        assert!(!Claim::MassBelow { point: 2, threshold: 0.01, gamma: Some(0.2) }.evaluate(&rows).passed);
        assert!(Claim::MassAbove { points: vec![1, 2], threshold: 0.6, gamma: None }.evaluate(&rows).passed);
        assert!(!Claim::MassAbove { points: vec![1], threshold: 0.5, gamma: Some(0.3) }.evaluate(&rows).passed);
    }

    #[test]
    fn failed_rows_fail_claims() {
        let mut r = row(0.1, vec![f64::NAN]);
        r.error = Some("blow-up".into());
        assert!(!Claim::MassBelow { point: 1, threshold: 1.0, gamma: None }.evaluate(&[r]).passed);
    }

    #[test]
    fn expansion_claims() {
        let mut r = row(0.1, vec![0.0]);
        r.expansion = Some(ExpansionCell { lhs: -0.1, rhs: 1.0, ratio: -0.1, se: 0.05 });
        assert!(Claim::ExpansionLhsNonnegative { sigmas: 3.0 }.evaluate(std::slice::from_ref(&r)).passed);
        assert!(!Claim::ExpansionLhsNonnegative { sigmas: 1.0 }.evaluate(std::slice::from_ref(&r)).passed);
        assert!(!Claim::ExpansionRatioWithin { lo: 0.8, hi: 1.2, gamma: None }.evaluate(&[r]).passed);
    }

    #[test]
    fn serde_shape_and_validation() {
        let c: Claim = serde_json::from_str(r#"{"rule": "mass_above", "points": [1, 3], "threshold": 0.98}"#).unwrap();
        assert_eq!(c.name(), "mass_above(fp=1+3;threshold=0.98;gamma=min)");
        assert!(c.validate(3).is_ok());
        assert!(c.validate(2).is_err());
        assert!(Claim::MassDecreasing { point: 0 }.validate(3).is_err());
    }
}
