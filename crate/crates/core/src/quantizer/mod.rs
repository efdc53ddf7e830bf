//! Lloyd's algorithm as a dynamical system: the exact one-dimensional map on
//! cell boundaries, the Monte-Carlo multi-dimensional map on codepoints, the
//! distortion that makes both descend, and brute-force oracles for the two
//! alternating minimization steps.

mod multi_d;
mod one_d;

pub use multi_d::{check_distinct, distortion_md, lloyd_map_md, voronoi_assign, Assignment, MIN_CELL_COUNT};
pub use one_d::{
    adaptive_simpson, centroid_1d, check_ordered, distortion_1d, lemma_a1_oracle, lemma_a2_oracle, lloyd_map_1d,
    BoundaryOracle, LevelOracle, MASS_FLOOR, QUADRATURE_TOL,
};

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemSpec;
use crate::equilibria::Classification;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovSpec;
use crate::region::BoxRegion;
use crate::rng::NoiseLaw;
use crate::zoo::{ExperimentDefaults, KnownFixedPoint, ModelCard, SystemFactory};

/// Source distributions with compact convex support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceLaw {
    /// Uniform on `[0, 1]`.
    Uniform1d,
    /// Density `2u` on `[0, 1]`.
    Ramp,
    /// Uniform on `[0, 1]²`.
    UniformSquare,
}

impl SourceLaw {
    pub fn dim(&self) -> usize {
        match self {
            SourceLaw::Uniform1d | SourceLaw::Ramp => 1,
            SourceLaw::UniformSquare => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SourceLaw::Uniform1d => "uniform_1d",
            SourceLaw::Ramp => "ramp",
            SourceLaw::UniformSquare => "uniform_square",
        }
    }

    /// `[m, M]` for laws on the line.
    pub fn interval(&self) -> Option<(f64, f64)> {
        (self.dim() == 1).then_some((0.0, 1.0))
    }

    pub fn support(&self) -> BoxRegion {
        BoxRegion::cube(self.dim(), 0.0, 1.0)
    }

    pub fn density(&self, u: &[f64]) -> f64 {
        if !self.support().contains(u) {
            return 0.0;
        }
        match self {
            SourceLaw::Uniform1d | SourceLaw::UniformSquare => 1.0,
            SourceLaw::Ramp => 2.0 * u[0],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            SourceLaw::Uniform1d | SourceLaw::UniformSquare => out.iter_mut().for_each(|v| *v = rng.random()),
            SourceLaw::Ramp => out[0] = rng.random::<f64>().sqrt(),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            SourceLaw::Uniform1d | SourceLaw::UniformSquare => vec![0.5; self.dim()],
            SourceLaw::Ramp => vec![2.0 / 3.0],
        }
    }
}

/// Writes one codepoint per row under an `x1..xd` header.
pub fn write_codebook_csv(path: &Path, x: &[Vec<f64>]) -> Result<()> {
    let d = x.first().map_or(0, |p| p.len());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=d).map(|i| format!("x{i}")))?;
    for p in x {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        w.write_record(p.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codebook_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            rec?.iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number `{f}`: {e}"))))
                .collect()
        })
        .collect()
}

/// Points per axis of the frozen midpoint grid standing in for the uniform
/// square inside the multi-dimensional card.
pub const CLOUD_PER_AXIS: usize = 100;

/// Lloyd's algorithm with `n` codepoints as a perturbed system.
///
/// On the line the state is the ordered vector of cell boundaries and the map
/// is exact; the projection sorts and clamps to the support. In the plane the
/// state stacks the `n` codepoints and the law is replaced by a frozen
/// midpoint grid, so the drift is a deterministic function of the state and
/// the distortion is exactly a Lyapunov function for it. A cell that catches
/// no grid point keeps its codepoint.
pub fn perturbed_lloyd_card(law: SourceLaw, n: usize) -> Result<ModelCard> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one codepoint".into()));
    }
    match law.dim() {
        1 => Ok(lloyd_1d_card(law, n)),
        _ => Ok(lloyd_md_card(law, n)),
    }
}

/// Fixed point of the one-dimensional map reached from equal spacing.
pub fn lloyd_fixed_point_1d(law: &SourceLaw, n: usize) -> Result<Vec<f64>> {
    let mut x: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
    if *law == SourceLaw::Uniform1d {
        return Ok(x);
    }
    for _ in 0..200_000 {
        let next = lloyd_map_1d(law, &x)?;
        let change = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if change < 1e-14 {
            break;
        }
    }
    Ok(x)
}

fn lloyd_1d_card(law: SourceLaw, n: usize) -> ModelCard {
    let (m, big_m) = law.interval().expect("law on the line");
    let v = LyapunovSpec::new(n, move |x| one_d::distortion_1d_total(&law, x))
        .with_gradient(move |x| one_d::distortion_gradient_1d(&law, x));
    let factory: SystemFactory = Arc::new(move |noise| {
        SystemSpec::from_fn(n, move |x, out| one_d::lloyd_map_1d_total(&law, x, out))
            .with_noise(noise)
            .with_projection(Arc::new(move |x: &[f64], out: &mut [f64]| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v.clamp(m, big_m);
                }
                out.sort_by(f64::total_cmp);
            }))
            .with_discontinuity(Arc::new(|x: &[f64]| x.windows(2).any(|w| w[0] == w[1])))
    });
    let domain = BoxRegion::cube(n, m, big_m);
    let cvt = lloyd_fixed_point_1d(&law, n).expect("fixed point iteration on a diffuse law");
    let mut defaults = ExperimentDefaults::standard(NoiseLaw::Gaussian, 0.1, &domain);
    defaults.horizon = 100_000;
    defaults.burn_in = 10_000;
    let mut card = ModelCard::new(
        "lloyd_1d",
        "one-dimensional Lloyd quantizer on cell boundaries",
        vec![("codepoints".into(), n as f64)],
        factory,
        Some(v),
        vec![KnownFixedPoint { location: cvt, classification: Some(Classification::StrictLocalMin), stable: true }],
        defaults,
        domain,
    );
    card.summary = format!("{} ({})", card.summary, law.name());
    card
}

fn midpoint_cloud(per_axis: usize) -> Vec<f64> {
    let mut cloud = Vec::with_capacity(2 * per_axis * per_axis);
    for i in 0..per_axis {
        for j in 0..per_axis {
            cloud.push((i as f64 + 0.5) / per_axis as f64);
            cloud.push((j as f64 + 0.5) / per_axis as f64);
        }
    }
    cloud
}

fn unstack(x: &[f64], d: usize) -> Vec<Vec<f64>> {
    x.chunks_exact(d).map(|c| c.to_vec()).collect()
}

fn lloyd_md_card(law: SourceLaw, n: usize) -> ModelCard {
    let d = law.dim();
    let cloud: Arc<Vec<f64>> = Arc::new(match law {
        SourceLaw::UniformSquare => midpoint_cloud(CLOUD_PER_AXIS),
        _ => multi_d::law_cloud(&law, CLOUD_PER_AXIS.pow(d as u32), 0),
    });
    let c = cloud.clone();
    let v = LyapunovSpec::new(n * d, move |x| multi_d::cloud_distortion(&unstack(x, d), &c, d));
    let factory: SystemFactory = Arc::new(move |noise| {
        let c = cloud.clone();
        let c2 = cloud.clone();
        SystemSpec::from_fn(n * d, move |x, out| {
            let pts = unstack(x, d);
            let stats = multi_d::route(&pts, &c, d);
            for (i, chunk) in out.chunks_exact_mut(d).enumerate() {
                match stats.centroid(i) {
                    Some(g) => chunk.copy_from_slice(&g),
                    None => chunk.copy_from_slice(&pts[i]),
                }
            }
        })
        .with_noise(noise)
        .with_projection(Arc::new(|x: &[f64], out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = v.clamp(0.0, 1.0);
            }
        }))
        .with_discontinuity(Arc::new(move |x: &[f64]| {
            let pts = unstack(x, d);
            check_distinct(&pts).is_err()
                || c2.chunks_exact(d).any(|u| voronoi_assign(&pts, u) == Assignment::Boundary)
        }))
    });
    let domain = BoxRegion::cube(n * d, 0.0, 1.0);
    let known = match (law, n) {
        (SourceLaw::UniformSquare, 1) => vec![vec![0.5, 0.5]],
        (SourceLaw::UniformSquare, 4) => vec![vec![0.25, 0.25, 0.75, 0.25, 0.25, 0.75, 0.75, 0.75]],
        _ => Vec::new(),
    };
    let mut defaults = ExperimentDefaults::standard(NoiseLaw::Gaussian, 0.1, &domain);
    defaults.horizon = 20_000;
    defaults.burn_in = 2_000;
    let mut card = ModelCard::new(
        "lloyd_2d",
        "planar Lloyd quantizer on a frozen grid of the uniform square",
        vec![("codepoints".into(), n as f64)],
        factory,
        Some(v),
        // the grid distortion is piecewise constant in the codepoints, so no
        // curvature classification applies
        known.into_iter().map(|location| KnownFixedPoint { location, classification: None, stable: true }).collect(),
        defaults,
        domain,
    );
    card.summary = format!("{} ({})", card.summary, law.name());
    card
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::discontinuity_avoidance;
    use crate::measure::{estimate_invariant, mass_in_ball, EstimationOptions};

    #[test]
    fn codebook_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.csv");
        let x = vec![vec![0.25, 0.75], vec![1.0 / 3.0, 0.1]];
        write_codebook_csv(&path, &x).unwrap();
        assert_eq!(read_codebook_csv(&path).unwrap(), x);
    }

    #[test]
    fn ramp_fixed_point_is_a_fixed_point() {
        let x = lloyd_fixed_point_1d(&SourceLaw::Ramp, 3).unwrap();
        let v = lloyd_map_1d(&SourceLaw::Ramp, &x).unwrap();
        assert!(v.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn one_d_card_concentrates_and_stays_ordered() {
        let card = perturbed_lloyd_card(SourceLaw::Uniform1d, 2).unwrap();
        let spec = card.system();
        let opts = EstimationOptions::new(20_000, card.domain.clone(), 5).chains(4);
        let m = estimate_invariant(&spec, 0.01, &opts).unwrap();
        assert!(m.samples().all(|x| x[0] <= x[1]));
        assert!(mass_in_ball(&m, &[1.0 / 3.0, 2.0 / 3.0], 0.1) > 0.9);
    }

    #[test]
    fn one_d_card_avoids_its_discontinuities() {
        let card = perturbed_lloyd_card(SourceLaw::Uniform1d, 2).unwrap();
        let probes = vec![vec![0.2, 0.7], vec![0.4, 0.45], vec![1.0 / 3.0, 2.0 / 3.0]];
        let r = discontinuity_avoidance(&card.system(), &probes, 0.01, 100_000, 1).unwrap();
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn grid_card_fixed_point_and_descent() {
        let card = perturbed_lloyd_card(SourceLaw::UniformSquare, 4).unwrap();
        let spec = card.system();
        let x = &card.known_fixed_points[0].location;
        assert!(crate::linalg::distance(&spec.drift(x), x) < 1e-12);
        let v = card.lyapunov().unwrap();
        for y in card.domain.quasi_random(50, 2) {
            assert!(v.value(&spec.drift(&y)) <= v.value(&y) + 1e-12);
        }
    }
}
