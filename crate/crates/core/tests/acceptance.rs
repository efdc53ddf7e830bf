//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p pdslab --test acceptance`; exits nonzero if any line fails.

use std::f64::consts::SQRT_2;
use std::fs;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use pdslab::equilibria::{iterated_form_curve, lemma_probe, noise_excitation, saddle_gap, unstable_projector};
use pdslab::experiment::{self, Claim, Command, ExperimentConfig, SweepReport, TestFunctionConfig};
use pdslab::linalg::fd_jacobian;
use pdslab::lyapunov::discontinuity_avoidance;
use pdslab::quantizer::{
    centroid_1d, distortion_1d, distortion_md, lemma_a1_oracle, lemma_a2_oracle, lloyd_map_1d, lloyd_map_md,
    SourceLaw,
};
use pdslab::rng::{self, NoiseLaw};
use pdslab::zoo::{self, ModelCard};
use pdslab::SystemSpec;
use rand::Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 2024;

// 1
const CURVATURE_TOL: f64 = 1e-5;
const ORIGIN_HESSIAN_TOL: f64 = 1e-6;
// 2
const FLOW_DERIVATIVE_TOL: f64 = 1e-6;
const FLOW_FD_STEP: f64 = 1e-5;
// 3
const SWEEP_BUDGET: Duration = Duration::from_secs(600);
// 4
const DESCENT_SLACK: f64 = 1e-9;
const DESCENT_PROBES: usize = 10_000;
const LLOYD_1D_CODEBOOKS: usize = 1_000;
const LLOYD_MD_CODEBOOKS: usize = 100;
const LLOYD_MD_SAMPLES: usize = 20_000;
const LLOYD_MD_SIGMAS: f64 = 3.0;
// 5
const ORACLE_INSTANCES: usize = 50;
const ORACLE_RESOLUTION: usize = 200;
const HALVING_RATIO: (f64, f64) = (0.4, 0.6);
// 6
const PROBE_MATRICES: usize = 100;
const PROBE_VECTORS: usize = 100;
const PROBE_P_MAX: usize = 200;
const PROBE_FLOOR: f64 = 1e-3;
const MIN_MODULUS: f64 = 1.05;
// 7
const GAP_TOL: f64 = 1e-6;
const PROJECTOR_TOL: f64 = 1e-8;
const EXCITATION_SAMPLES: usize = 1_000_000;
const EXCITATION_SIGMAS: f64 = 3.0;
const DIVERGENCE_BY: usize = 30;
// 9
const LANDING_DRAWS: usize = 1_000_000;
const COUNTEREXAMPLE_BAND: (f64, f64) = (0.45, 0.55);

struct Outcome {
    id: &'static str,
    passed: bool,
}

fn report(out: &mut Vec<Outcome>, id: &'static str, passed: bool, detail: String, started: Instant) {
    let detail = format!("{detail} [{:.1}s]", started.elapsed().as_secs_f64());
    println!("{} {id}: {detail}", if passed { "PASS" } else { "FAIL" });
    out.push(Outcome { id, passed });
}

fn card(name: &str) -> ModelCard {
    zoo::make_model(name, &Default::default()).expect("card builds")
}

fn lemniscate_curvature(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let v = card("lemniscate").lyapunov.expect("lemniscate has V");
    let expected = -5.0 / 2f64.powf(11.0 / 4.0);
    let mut worst: f64 = 0.0;
    for s in [SQRT_2, -SQRT_2] {
        let h = v.fd_hessian(&[s, s]);
        let target = DMatrix::identity(2, 2) * expected;
        worst = worst.max((h - target).abs().max());
    }
    let origin = v.fd_hessian(&[0.0, 0.0]).abs().max();
    report(
        out,
        "1 lemniscate curvature",
        worst < CURVATURE_TOL && origin < ORIGIN_HESSIAN_TOL,
        format!("max |H - ({expected:.5})I| = {worst:.2e} at the maxima, max |H(0)| = {origin:.2e}"),
        t,
    );
}

fn double_well_instability(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for u0 in [0.25, 0.5] {
        let spec = zoo::make_double_well(u0).unwrap().system();
        let d = (spec.drift(&[FLOW_FD_STEP])[0] - spec.drift(&[-FLOW_FD_STEP])[0]) / (2.0 * FLOW_FD_STEP);
        worst = worst.max((d - u0.exp()).abs());
    }
    report(out, "2 double-well instability", worst < FLOW_DERIVATIVE_TOL, format!("max |Df(0) - e^u0| = {worst:.2e}"), t);
}

fn sweep(name: &str, test_function: Option<TestFunctionConfig>) -> (SweepReport, Duration) {
    let mut cfg = ExperimentConfig::for_model(name);
    cfg.seed = SEED;
    cfg.test_function = test_function;
    cfg.claims = Some(Vec::new());
    let plan = cfg.resolve(Command::Sweep).expect("default config is valid");
    let t = Instant::now();
    let r = experiment::run_sweep(&plan, 1).expect("sweep runs");
    (r, t.elapsed())
}

fn claims_line(r: &SweepReport, claims: &[Claim]) -> (bool, String) {
    let verdicts: Vec<_> = claims.iter().map(|c| c.evaluate(&r.rows)).collect();
    let passed = verdicts.iter().all(|v| v.passed);
    let detail: Vec<String> = verdicts.iter().map(|v| format!("{} -> {}", v.claim, v.detail)).collect();
    (passed, detail.join("; "))
}

fn exclusion_and_expansion(out: &mut Vec<Outcome>) {
    use Claim::*;
    let t = Instant::now();
    let tf = TestFunctionConfig { targets: Some(vec![vec![0.0]]), cap: Some(1.0), ..Default::default() };
    let (dw, took) = sweep("double_well", Some(tf));
    let (ok, d) = claims_line(&dw, &[MassDecreasing { point: 2 }, MassBelow { point: 2, threshold: 0.01, gamma: None }]);
    report(out, "3a double-well exclusion", ok && took < SWEEP_BUDGET, d, t);

    let (ok, d) = claims_line(
        &dw,
        &[ExpansionRatioWithin { lo: 0.8, hi: 1.2, gamma: Some(0.02) }, ExpansionLhsNonnegative { sigmas: 3.0 }],
    );
    let cells: Vec<String> = dw
        .rows
        .iter()
        .map(|r| match &r.expansion {
            Some(e) => format!("gamma {}: lhs {:.3e} rhs {:.3e} se {:.1e}", r.gamma, e.lhs, e.rhs, e.se),
            None => format!("gamma {}: missing", r.gamma),
        })
        .collect();
    report(out, "8 second-order expansion", ok, format!("{d}; {}", cells.join(", ")), t);

    let t = Instant::now();
    let (r, took) = sweep("coordination_game", None);
    let (ok, d) = claims_line(
        &r,
        &[
            MassBelow { point: 2, threshold: 0.01, gamma: Some(0.02) },
            MassAbove { points: vec![1, 3], threshold: 0.98, gamma: Some(0.02) },
        ],
    );
    report(out, "3b coordination-game exclusion", ok && took < SWEEP_BUDGET, d, t);

    let t = Instant::now();
    let (r, took) = sweep("quartic_saddle", None);
    let (ok, d) = claims_line(&r, &[MassBelow { point: 2, threshold: 0.02, gamma: Some(0.02) }]);
    report(out, "3c quartic-saddle exclusion", ok && took < SWEEP_BUDGET, d, t);

    let t = Instant::now();
    let (r, took) = sweep("lemniscate", None);
    let (ok, d) = claims_line(&r, &[MassAbove { points: vec![2], threshold: 0.9, gamma: Some(0.02) }]);
    report(out, "3d lemniscate concentration", ok && took < SWEEP_BUDGET, d, t);
}

fn descent_suites(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["double_well", "quartic_saddle", "lemniscate"] {
        let c = card(name);
        let v = c.lyapunov.as_ref().unwrap();
        let spec = c.system();
        let worst = c
            .domain
            .quasi_random(DESCENT_PROBES, SEED)
            .iter()
            .map(|x| v.value(&spec.drift(x)) - v.value(x))
            .fold(f64::NEG_INFINITY, f64::max);
        ok &= worst <= DESCENT_SLACK;
        lines.push(format!("{name} max increase {worst:.1e}"));
    }

    let mut r = rng::stream(SEED, &[4, 1]);
    let mut worst_1d = f64::NEG_INFINITY;
    let mut done = 0;
    while done < LLOYD_1D_CODEBOOKS {
        let law = if done % 2 == 0 { SourceLaw::Uniform1d } else { SourceLaw::Ramp };
        let n = r.random_range(1..=6);
        let mut x: Vec<f64> = (0..n).map(|_| r.random_range(0.02..0.98)).collect();
        x.sort_by(f64::total_cmp);
        if x.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        done += 1;
        let next = lloyd_map_1d(&law, &x).unwrap();
        worst_1d = worst_1d.max(distortion_1d(&law, &next).unwrap() - distortion_1d(&law, &x).unwrap());
    }
    ok &= worst_1d <= DESCENT_SLACK;
    lines.push(format!("lloyd_1d max increase {worst_1d:.1e}"));

    let law = SourceLaw::UniformSquare;
    let mut r = rng::stream(SEED, &[4, 2]);
    let mut worst_md = f64::NEG_INFINITY;
    let mut done = 0;
    while done < LLOYD_MD_CODEBOOKS {
        let n = r.random_range(1..=4);
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
        let spread = x.iter().enumerate().all(|(i, p)| x[i + 1..].iter().all(|q| pdslab::linalg::distance(p, q) > 0.15));
        if !spread {
            continue;
        }
        let s = 3 * done as u64;
        let next = lloyd_map_md(&law, &x, LLOYD_MD_SAMPLES, s).unwrap();
        let before = distortion_md(&law, &x, LLOYD_MD_SAMPLES, s + 1).unwrap();
        let after = distortion_md(&law, &next, LLOYD_MD_SAMPLES, s + 2).unwrap();
        let se = before.standard_error.hypot(after.standard_error);
        worst_md = worst_md.max((after.estimate - before.estimate) / se);
        done += 1;
    }
    ok &= worst_md <= LLOYD_MD_SIGMAS;
    lines.push(format!("lloyd_md max increase {worst_md:.2} se"));
    report(out, "4 Lyapunov descent", ok, lines.join(", "), t);
}

fn lloyd_oracles(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let mut r = rng::stream(SEED, &[5]);
    let mut within = true;
    let (mut level_gaps, mut boundary_gaps) = ([0.0; 2], [0.0; 2]);
    let mut counts = [0usize; 2];
    let mut done = 0;
    while done < ORACLE_INSTANCES {
        let law = if done % 2 == 0 { SourceLaw::Uniform1d } else { SourceLaw::Ramp };
        let n = r.random_range(1..=5);
        let mut a: Vec<f64> = (0..n).map(|_| r.random_range(0.05..0.95)).collect();
        a.sort_by(f64::total_cmp);
        let mut levels: Vec<f64> = (0..n + 1).map(|_| r.random_range(0.05..0.95)).collect();
        levels.sort_by(f64::total_cmp);
        if a.windows(2).any(|w| w[1] - w[0] < 0.02) || levels.windows(2).any(|w| w[1] - w[0] < 0.02) {
            continue;
        }
        let mut cells = vec![0.0];
        cells.extend(&a);
        cells.push(1.0);
        for (k, res) in [ORACLE_RESOLUTION, 2 * ORACLE_RESOLUTION].into_iter().enumerate() {
            let o = lemma_a1_oracle(&law, &a, res).unwrap();
            for (j, arg) in o.argmins.iter().enumerate() {
                let gap = (arg - centroid_1d(&law, cells[j], cells[j + 1]).unwrap()).abs();
                within &= gap <= o.grid_step;
                level_gaps[k] += gap;
            }
            let o = lemma_a2_oracle(&law, &levels, res).unwrap();
            for (j, arg) in o.argmins.iter().enumerate() {
                let gap = (arg - 0.5 * (levels[j] + levels[j + 1])).abs();
                within &= gap <= o.grid_step && o.flat_sets[j].is_none();
                boundary_gaps[k] += gap;
            }
        }
        counts[0] += n + 1;
        counts[1] += n;
        done += 1;
    }
    let ratios = [level_gaps[1] / level_gaps[0], boundary_gaps[1] / boundary_gaps[0]];
    let halves = ratios.iter().all(|q| (HALVING_RATIO.0..=HALVING_RATIO.1).contains(q));
    report(
        out,
        "5 Lloyd step oracles",
        within && halves,
        format!(
            "all argmins within one grid cell: {within}; mean gap ratio on halving: levels {:.3} over {} cells, boundaries {:.3} over {}",
            ratios[0], counts[0], ratios[1], counts[1]
        ),
        t,
    );
}

fn random_orthogonal<R: Rng>(r: &mut R) -> DMatrix<f64> {
    let m = DMatrix::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
    m.qr().q()
}

/// `S B S⁻¹` with a well-conditioned `S` and every eigenvalue of `B` of
/// modulus at least `MIN_MODULUS`; half of them carry a complex pair.
fn expanding_matrix<R: Rng>(r: &mut R, complex: bool) -> DMatrix<f64> {
    let mut modulus = || r.random_range(MIN_MODULUS..2.0) * if r.random::<bool>() { 1.0 } else { -1.0 };
    let (m0, m1, m2) = (modulus(), modulus(), modulus());
    let mut b = DMatrix::from_diagonal(&DVector::from_row_slice(&[m0, m1, m2]));
    if complex {
        let th: f64 = r.random_range(0.1..3.0);
        let rho = m1.abs();
        b[(1, 1)] = rho * th.cos();
        b[(1, 2)] = -rho * th.sin();
        b[(2, 1)] = rho * th.sin();
        b[(2, 2)] = rho * th.cos();
    }
    let scales = DVector::from_fn(3, |_, _| r.random_range(0.5..2.0));
    let s = random_orthogonal(r) * DMatrix::from_diagonal(&scales) * random_orthogonal(r);
    let s_inv = s.clone().try_inverse().expect("well conditioned");
    s * b * s_inv
}

fn probe_lemma(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let mut r = rng::stream(SEED, &[6]);
    let mut worst = f64::INFINITY;
    for i in 0..PROBE_MATRICES {
        let a = expanding_matrix(&mut r, i % 2 == 1);
        for _ in 0..PROBE_VECTORS {
            let v = DVector::from_fn(3, |_, _| r.sample::<f64, _>(StandardNormal)).normalize();
            worst = worst.min(lemma_probe(&a, v.as_slice(), PROBE_P_MAX));
        }
    }
    let zero = lemma_probe(&DMatrix::identity(3, 3), &[0.0; 3], PROBE_P_MAX);
    report(
        out,
        "6 expanding-matrix probe",
        worst > PROBE_FLOOR && zero == 0.0,
        format!("min over matrices and vectors {worst:.3e}, zero vector {zero}"),
        t,
    );
}

fn saddle_closed_forms(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let c = zoo::make_quartic_saddle(0.5).unwrap();
    let v = c.lyapunov.as_ref().unwrap();
    let spec = c.system_with(NoiseLaw::Gaussian);
    let x = [0.0, 0.0];
    let gap = saddle_gap(v, spec.drift_map().as_ref(), &x);
    let gap_err = (gap - (1.0 - (-1.0f64).exp())).abs();
    let a = fd_jacobian(spec.drift_map().as_ref(), &x, 2);
    let (p, rank) = unstable_projector(&a, 1.0).unwrap();
    let p_err = (&p - DMatrix::from_diagonal(&DVector::from_row_slice(&[0.0, 1.0]))).abs().max();
    let e = noise_excitation(&spec, &x, &p, EXCITATION_SAMPLES, SEED).unwrap();
    let e_ok = (e.estimate - 1.0).abs() <= EXCITATION_SIGMAS * e.standard_error;
    let mut r = rng::stream(SEED, &[7]);
    let samples: Vec<Vec<f64>> =
        (0..1000).map(|_| vec![r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal)]).collect();
    let curve = iterated_form_curve(&a, &v.hessian(&x), &samples, DIVERGENCE_BY).unwrap();
    let decreasing = curve.values.windows(2).all(|w| w[1] < w[0]);
    report(
        out,
        "7 saddle closed forms",
        gap_err < GAP_TOL && p_err < PROJECTOR_TOL && rank == 1 && e_ok && decreasing && curve.divergent,
        format!(
            "gap error {gap_err:.1e}, projector error {p_err:.1e} (rank {rank}), excitation {:.4} ± {:.4}, Q_p decreasing {decreasing}, divergent {}",
            e.estimate, e.standard_error, curve.divergent
        ),
        t,
    );
}

fn discontinuity(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let game = card("coordination_game").system();
    let probes: Vec<Vec<f64>> = [0.05, 0.25, 0.45, 0.5, 0.55, 0.75, 0.95].iter().map(|x| vec![*x]).collect();
    let g = discontinuity_avoidance(&game, &probes, 0.6, LANDING_DRAWS, SEED).unwrap();
    let lloyd = card("lloyd_1d").system();
    let codebooks = vec![vec![0.2, 0.6], vec![1.0 / 3.0, 2.0 / 3.0], vec![0.1, 0.9], vec![0.45, 0.55]];
    let l = discontinuity_avoidance(&lloyd, &codebooks, 0.05, LANDING_DRAWS, SEED).unwrap();
    let counter = SystemSpec::from_fn(1, |x, out| out[0] = x[0])
        .with_noise(NoiseLaw::TwoPoint)
        .with_discontinuity(Arc::new(|x: &[f64]| x[0] == 0.75));
    let c = discontinuity_avoidance(&counter, &[vec![0.5]], 0.25, LANDING_DRAWS, SEED).unwrap();
    report(
        out,
        "9 discontinuity avoidance",
        g.max == 0.0 && l.max == 0.0 && (COUNTEREXAMPLE_BAND.0..=COUNTEREXAMPLE_BAND.1).contains(&c.max),
        format!("coordination max {}, lloyd_1d max {}, two-point counterexample {:.4}", g.max, l.max, c.max),
        t,
    );
}

fn determinism(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut checked = Vec::new();
    for name in ["double_well", "lemniscate", "coordination_game"] {
        let mut cfg = ExperimentConfig::for_model(name);
        cfg.seed = SEED;
        cfg.chains = Some(4);
        cfg.horizon = Some(20_000);
        if name == "double_well" {
            cfg.test_function = Some(TestFunctionConfig { rhs_samples: Some(10_000), ..Default::default() });
        }
        let plan = cfg.resolve(Command::Sweep).unwrap();
        let mut csvs = Vec::new();
        for (k, workers) in [1, 1, 8].into_iter().enumerate() {
            let report = experiment::run_sweep(&plan, workers).unwrap();
            let path = dir.path().join(format!("{name}_{k}.csv"));
            experiment::write_sweep_csv(&path, &report).unwrap();
            csvs.push(fs::read(path).unwrap());
        }
        ok &= csvs[0] == csvs[1] && csvs[0] == csvs[2];
        checked.push(name);
    }
    report(out, "10 determinism", ok, format!("rerun and 1 vs 8 workers byte-identical for {}", checked.join(", ")), t);
}

fn main() {
    let mut out = Vec::new();
    lemniscate_curvature(&mut out);
    double_well_instability(&mut out);
    descent_suites(&mut out);
    lloyd_oracles(&mut out);
    probe_lemma(&mut out);
    saddle_closed_forms(&mut out);
    discontinuity(&mut out);
    determinism(&mut out);
    exclusion_and_expansion(&mut out);

    let failed: Vec<&str> = out.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("{} of {} criteria passed", out.len() - failed.len(), out.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
