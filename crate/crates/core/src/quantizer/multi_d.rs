use super::SourceLaw;
use crate::dynamics::{McEstimate, Welford};
use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// Minimum number of samples routed to a cell for its centroid to count.
pub const MIN_CELL_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Zero-based index of the open cell containing the point.
    Cell(usize),
    /// Equidistant to two distinct nearest codepoints.
    Boundary,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Voronoi cell of `u`. Repeated codepoints own a single cell, the one with
/// the smallest index; the copies own empty cells.
pub fn voronoi_assign(x: &[Vec<f64>], u: &[f64]) -> Assignment {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    let mut tie = false;
    for (i, p) in x.iter().enumerate() {
        let d = sq_dist(p, u);
        if d < best_d {
            best = i;
            best_d = d;
            tie = false;
        } else if d == best_d && x[best] != *p {
            tie = true;
        }
    }
    if tie {
        Assignment::Boundary
    } else {
        Assignment::Cell(best)
    }
}

pub fn check_distinct(x: &[Vec<f64>]) -> Result<()> {
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[i] == x[j] {
                return Err(Error::DuplicateCodepoint { first: i, second: j });
            }
        }
    }
    Ok(())
}

/// Per-cell sample counts and coordinate sums over a flat cloud.
pub(crate) struct CellStats {
    pub counts: Vec<usize>,
    pub sums: Vec<Vec<f64>>,
}

pub(crate) fn route(x: &[Vec<f64>], cloud: &[f64], d: usize) -> CellStats {
    let mut counts = vec![0usize; x.len()];
    let mut sums = vec![vec![0.0; d]; x.len()];
    for u in cloud.chunks_exact(d) {
        if let Assignment::Cell(i) = voronoi_assign(x, u) {
            counts[i] += 1;
            for (s, v) in sums[i].iter_mut().zip(u) {
                *s += v;
            }
        }
    }
    CellStats { counts, sums }
}

impl CellStats {
    pub fn centroid(&self, i: usize) -> Option<Vec<f64>> {
        (self.counts[i] > 0).then(|| self.sums[i].iter().map(|s| s / self.counts[i] as f64).collect())
    }
}

fn check_codebook(law: &SourceLaw, x: &[Vec<f64>]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("codebook is empty".into()));
    }
    for p in x {
        if p.len() != law.dim() {
            return Err(Error::DimensionMismatch { expected: law.dim(), got: p.len() });
        }
    }
    check_distinct(x)
}

pub(crate) fn law_cloud(law: &SourceLaw, n_mc: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, &[tags::LAW]);
    let d = law.dim();
    let mut cloud = vec![0.0; n_mc * d];
    for u in cloud.chunks_exact_mut(d) {
        law.sample(&mut r, u);
    }
    cloud
}

/// Lloyd step by Monte Carlo: each codepoint moves to the mean of the `n_mc`
/// law samples falling in its cell. Samples on cell boundaries are dropped.
pub fn lloyd_map_md(law: &SourceLaw, x: &[Vec<f64>], n_mc: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_codebook(law, x)?;
    let d = law.dim();
    let stats = route(x, &law_cloud(law, n_mc, seed), d);
    (0..x.len())
        .map(|i| {
            if stats.counts[i] < MIN_CELL_COUNT {
                return Err(Error::UnderfilledCell { index: i, count: stats.counts[i] });
            }
            Ok(stats.centroid(i).expect("nonempty cell"))
        })
        .collect()
}

/// `E |Q_x(X) − X|²` where `Q_x` sends each cell to its own centroid, by
/// Monte Carlo on `n_mc` draws (centroids from the same draws).
pub fn distortion_md(law: &SourceLaw, x: &[Vec<f64>], n_mc: usize, seed: u64) -> Result<McEstimate> {
    check_codebook(law, x)?;
    if n_mc < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let d = law.dim();
    let cloud = law_cloud(law, n_mc, seed);
    let stats = route(x, &cloud, d);
    let centroids: Vec<Option<Vec<f64>>> = (0..x.len()).map(|i| stats.centroid(i)).collect();
    let mut acc = Welford::default();
    for u in cloud.chunks_exact(d) {
        if let Assignment::Cell(i) = voronoi_assign(x, u) {
            acc.push(sq_dist(centroids[i].as_ref().expect("routed cell has a centroid"), u));
        }
    }
    Ok(acc.estimate())
}

/// Distortion of a codebook against a fixed cloud; exact for the cloud's
/// empirical law.
pub(crate) fn cloud_distortion(x: &[Vec<f64>], cloud: &[f64], d: usize) -> f64 {
    let stats = route(x, cloud, d);
    let centroids: Vec<Option<Vec<f64>>> = (0..x.len()).map(|i| stats.centroid(i)).collect();
    let (mut total, mut count) = (0.0, 0usize);
    for u in cloud.chunks_exact(d) {
        if let Assignment::Cell(i) = voronoi_assign(x, u) {
            total += sq_dist(centroids[i].as_ref().expect("routed cell has a centroid"), u);
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        total / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    const SQ: SourceLaw = SourceLaw::UniformSquare;

    #[test]
    fn assignment_examples() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(voronoi_assign(&x, &[0.2, 0.5]), Assignment::Cell(0));
        assert_eq!(voronoi_assign(&x, &[0.5, 0.3]), Assignment::Boundary);
        let dup = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(voronoi_assign(&dup, &[0.01, -0.02]), Assignment::Cell(0));
    }

    #[test]
    fn permuting_duplicates_keeps_assignment() {
        let a = vec![vec![0.3, 0.3], vec![0.3, 0.3], vec![0.7, 0.6]];
        let b = vec![vec![0.3, 0.3], vec![0.7, 0.6], vec![0.3, 0.3]];
        let canon = |x: &[Vec<f64>], s: Assignment| match s {
            Assignment::Cell(i) => Some(x[i].clone()),
            Assignment::Boundary => None,
        };
        let mut r = rng::stream(4, &[0]);
        for _ in 0..10_000 {
            let u = [r.random::<f64>(), r.random::<f64>()];
            assert_eq!(canon(&a, voronoi_assign(&a, &u)), canon(&b, voronoi_assign(&b, &u)));
        }
    }

    #[test]
    fn single_codepoint_goes_to_mean() {
        let v = lloyd_map_md(&SQ, &[vec![0.1, 0.9]], 50_000, 1).unwrap();
        assert!((v[0][0] - 0.5).abs() < 0.01 && (v[0][1] - 0.5).abs() < 0.01);
        let one_d = distortion_md(&SourceLaw::Uniform1d, &[vec![0.3]], 200_000, 2).unwrap();
        assert!((one_d.estimate - 1.0 / 12.0).abs() < 3.0 * one_d.standard_error);
    }

    #[test]
    fn grid_cvt_is_fixed() {
        let x = vec![vec![0.25, 0.25], vec![0.75, 0.25], vec![0.25, 0.75], vec![0.75, 0.75]];
        let n = 100_000;
        let v = lloyd_map_md(&SQ, &x, n, 3).unwrap();
        // a quarter of the samples per cell, coordinate sd 0.25/√3
        let se = (0.25 / 3f64.sqrt()) / ((n / 4) as f64).sqrt();
        for (a, b) in v.iter().flatten().zip(x.iter().flatten()) {
            assert!((a - b).abs() < 3.0 * se);
        }
    }

    #[test]
    fn errors_name_the_cell() {
        let x = vec![vec![0.5, 0.5], vec![5.0, 5.0]];
        assert!(matches!(lloyd_map_md(&SQ, &x, 1000, 0), Err(Error::UnderfilledCell { index: 1, count: 0 })));
        let dup = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert!(matches!(lloyd_map_md(&SQ, &dup, 1000, 0), Err(Error::DuplicateCodepoint { first: 0, second: 1 })));
    }
}
