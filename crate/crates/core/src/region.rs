use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo_1, hi_1] × … × [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("box bounds must be nonempty and of equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
            return Err(Error::InvalidArgument(format!("invalid box bounds {lo:?} .. {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self { lo: vec![lo; dim], hi: vec![hi; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a == b { a } else { rng.random_range(a..b) })
            .collect()
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.lo.iter().zip(&self.hi)).map(|(t, (a, b))| a + t * (b - a)).collect()
    }

    /// `n` points of an additive recurrence (Kronecker) sequence filling the
    /// box, shifted by a seeded offset.
    pub fn quasi_random(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let d = self.dim();
        let alphas = kronecker_alphas(d);
        let mut rng = crate::rng::stream(seed, &[crate::rng::tags::PROBE]);
        let offset: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        (0..n)
            .map(|k| {
                let u: Vec<f64> = (0..d)
                    .map(|j| (offset[j] + alphas[j] * (k as f64 + 1.0)).fract())
                    .collect();
                self.from_unit(&u)
            })
            .collect()
    }

    /// Regular grid with `per_axis` points per coordinate, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(d as u32);
        (0..total)
            .map(|mut k| {
                let mut u = vec![0.0; d];
                for uj in u.iter_mut() {
                    *uj = (k % per_axis) as f64 / (per_axis - 1) as f64;
                    k /= per_axis;
                }
                self.from_unit(&u)
            })
            .collect()
    }
}

/// Generalized golden-ratio increments: `1/φ_d^j` with `φ_d` the positive root
/// of `x^{d+1} = x + 1`.
fn kronecker_alphas(d: usize) -> Vec<f64> {
    let mut phi = 2.0_f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d).map(|j| phi.powi(-(j as i32))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quasi_random_points_stay_inside_and_spread() {
        let b = BoxRegion::cube(2, -3.0, 3.0);
        let pts = b.quasi_random(1000, 4);
        assert!(pts.iter().all(|p| b.contains(p)));
        let quadrant = pts.iter().filter(|p| p[0] > 0.0 && p[1] > 0.0).count();
        assert!((200..300).contains(&quadrant));
    }

    #[test]
    fn golden_ratio_in_one_dimension() {
        let a = kronecker_alphas(1)[0];
        assert!((a - 0.618_033_988_749_894_9).abs() < 1e-12);
    }

    #[test]
    fn grid_covers_corners() {
        let b = BoxRegion::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let g = b.grid(3);
        assert_eq!(g.len(), 9);
        assert!(g.contains(&vec![0.0, 1.0]) && g.contains(&vec![1.0, 2.0]));
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(BoxRegion::new(vec![1.0], vec![0.0]).is_err());
    }
}
