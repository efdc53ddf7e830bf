use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::sweep::{FixedPointRow, SweepReport};
use super::Verdict;
use crate::error::Result;

fn num(v: f64) -> String {
    v.to_string()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `gamma,nu_V,mass_fp_1..k,total_mass,w1_prev,exp_lhs,exp_rhs,exp_ratio,verdict`.
pub fn write_sweep_csv(path: &Path, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["gamma".to_string(), "nu_V".into()];
    header.extend((1..=report.fixed_points.len()).map(|i| format!("mass_fp_{i}")));
    header.extend(["total_mass", "w1_prev", "exp_lhs", "exp_rhs", "exp_ratio", "verdict"].map(String::from));
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![num(r.gamma), num(r.nu_v)];
        rec.extend(r.masses.iter().map(|m| num(*m)));
        rec.push(num(r.total_mass));
        rec.push(num(r.w1_prev));
        match &r.expansion {
            Some(e) => rec.extend([num(e.lhs), num(e.rhs), num(e.ratio)]),
            None => rec.extend(["NaN", "NaN", "NaN"].map(String::from)),
        }
        rec.push(r.verdict.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `gamma,lhs,rhs,ratio,bootstrap_se`.
pub fn write_expansion_csv(path: &Path, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["gamma", "lhs", "rhs", "ratio", "bootstrap_se"])?;
    for r in &report.rows {
        let cells = match &r.expansion {
            Some(e) => [e.lhs, e.rhs, e.ratio, e.se],
            None => [f64::NAN; 4],
        };
        let mut rec = vec![num(r.gamma)];
        rec.extend(cells.iter().map(|v| num(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_verdicts_csv(path: &Path, verdicts: &[Verdict]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["claim", "passed", "detail"])?;
    for v in verdicts {
        w.write_record([v.claim.as_str(), if v.passed { "true" } else { "false" }, v.detail.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// `index,x_1..x_d,residual,classification,saddle_gap,unstable_dim,excitation,excitation_se,stability,note`.
pub fn write_fixed_points_csv(path: &Path, rows: &[FixedPointRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = rows.first().map_or(0, |r| r.location.len());
    let mut header = vec!["index".to_string()];
    header.extend((1..=dim).map(|i| format!("x_{i}")));
    header.extend(
        ["residual", "classification", "saddle_gap", "unstable_dim", "excitation", "excitation_se", "stability", "note"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(r.location.iter().map(|x| num(*x)));
        rec.push(num(r.residual));
        rec.push(opt(r.classification.map(|c| c.as_str())));
        rec.push(num(r.saddle_gap));
        rec.push(opt(r.unstable_dim));
        rec.push(opt(r.excitation.map(|e| e.estimate)));
        rec.push(opt(r.excitation.map(|e| e.standard_error)));
        rec.push(opt(r.stability.map(|s| s.as_str())));
        rec.push(r.note.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line plot of the ball masses against `log10(gamma)`, one line per fixed
/// point plus the total.
pub fn sweep_svg(report: &SweepReport) -> String {
    let rows: Vec<_> = report.rows.iter().filter(|r| r.error.is_none()).collect();
    let lg: Vec<f64> = rows.iter().map(|r| r.gamma.log10()).collect();
    let (lo, hi) = lg.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    // larger gamma on the left, as the sweep runs
    let px = |l: f64| MARGIN + (hi - l) / span * (WIDTH - 2.0 * MARGIN);
    let py = |m: f64| HEIGHT - MARGIN - m.clamp(0.0, 1.0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">{} ball masses</text>"#,
        WIDTH / 2.0,
        report.model
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, py(0.0), py(1.0));
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for t in [0.0, 0.5, 1.0] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#, x0 - 6.0, py(t) + 4.0);
    }
    for (r, l) in rows.iter().zip(&lg) {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, px(*l), y0 + 18.0, r.gamma);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">gamma</text>"#, WIDTH / 2.0, HEIGHT - 10.0);

    let k = report.fixed_points.len();
    let mut series: Vec<(String, Vec<f64>)> =
        (0..k).map(|j| (format!("fp {}", j + 1), rows.iter().map(|r| r.masses[j]).collect())).collect();
    series.push(("total".into(), rows.iter().map(|r| r.total_mass).collect()));
    for (j, (label, ys)) in series.iter().enumerate() {
        let color = if j == k { "black" } else { COLORS[j % COLORS.len()] };
        let pts: Vec<String> = lg.iter().zip(ys).map(|(l, m)| format!("{:.2},{:.2}", px(*l), py(*m))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{label}</text>"#,
            WIDTH - MARGIN + 5.0,
            MARGIN + 15.0 * j as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_sweep_svg(path: &Path, report: &SweepReport) -> Result<()> {
    fs::write(path, sweep_svg(report))?;
    Ok(())
}
