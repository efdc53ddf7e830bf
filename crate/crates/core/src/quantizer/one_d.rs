use super::SourceLaw;
use crate::error::{Error, Result};

/// Absolute tolerance of the adaptive Simpson rule.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Cells lighter than this have no meaningful centroid.
pub const MASS_FLOOR: f64 = 1e-12;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::Quadrature { lo: a, hi: b });
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature { lo: a, hi: b });
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

fn interval(law: &SourceLaw) -> Result<(f64, f64)> {
    law.interval().ok_or_else(|| Error::InvalidArgument(format!("{} is not a law on the line", law.name())))
}

fn moments(law: &SourceLaw, a: f64, b: f64) -> Result<(f64, f64, f64)> {
    let m0 = adaptive_simpson(&|u| law.density(&[u]), a, b, QUADRATURE_TOL)?;
    let m1 = adaptive_simpson(&|u| u * law.density(&[u]), a, b, QUADRATURE_TOL)?;
    let m2 = adaptive_simpson(&|u| u * u * law.density(&[u]), a, b, QUADRATURE_TOL)?;
    Ok((m0, m1, m2))
}

/// Conditional mean of the law on `(alpha, beta]`, and `alpha` when the two
/// coincide.
pub fn centroid_1d(law: &SourceLaw, alpha: f64, beta: f64) -> Result<f64> {
    let (m, big_m) = interval(law)?;
    if !(m <= alpha && alpha <= beta && beta <= big_m) {
        return Err(Error::InvalidArgument(format!("need {m} <= {alpha} <= {beta} <= {big_m}")));
    }
    if alpha == beta {
        return Ok(alpha);
    }
    let mass = adaptive_simpson(&|u| law.density(&[u]), alpha, beta, QUADRATURE_TOL)?;
    if mass < MASS_FLOOR {
        return Err(Error::DegenerateCell { alpha, beta, mass });
    }
    let first = adaptive_simpson(&|u| u * law.density(&[u]), alpha, beta, QUADRATURE_TOL)?;
    Ok((first / mass).clamp(alpha, beta))
}

/// Checks `m < x¹ < … < xⁿ < M`.
pub fn check_ordered(law: &SourceLaw, x: &[f64]) -> Result<()> {
    let (m, big_m) = interval(law)?;
    if x.is_empty() {
        return Err(Error::InvalidArgument("codebook is empty".into()));
    }
    let mut prev = m;
    for (i, v) in x.iter().enumerate() {
        if !(*v > prev) {
            return Err(Error::OrderingViolation { index: i });
        }
        prev = *v;
    }
    if !(prev < big_m) {
        return Err(Error::OrderingViolation { index: x.len() - 1 });
    }
    Ok(())
}

fn boundaries(law: &SourceLaw, x: &[f64]) -> Result<Vec<f64>> {
    let (m, big_m) = interval(law)?;
    let mut b = Vec::with_capacity(x.len() + 2);
    b.push(m);
    b.extend_from_slice(x);
    b.push(big_m);
    Ok(b)
}

/// One Lloyd step on the cell boundaries `x`: `vⁱ = ½(g(xⁱ⁻¹, xⁱ) + g(xⁱ, xⁱ⁺¹))`
/// with `x⁰ = m`, `xⁿ⁺¹ = M`.
pub fn lloyd_map_1d(law: &SourceLaw, x: &[f64]) -> Result<Vec<f64>> {
    check_ordered(law, x)?;
    let b = boundaries(law, x)?;
    let g: Vec<f64> = b.windows(2).map(|w| centroid_1d(law, w[0], w[1])).collect::<Result<_>>()?;
    let v: Vec<f64> = g.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    check_ordered(law, &v)?;
    Ok(v)
}

/// Total version of the Lloyd step used as a drift: the input is sorted and
/// clamped to the support, and cells without mass take their midpoint.
pub(crate) fn lloyd_map_1d_total(law: &SourceLaw, x: &[f64], out: &mut [f64]) {
    let Ok(b) = sorted_boundaries(law, x) else {
        out.fill(f64::NAN);
        return;
    };
    let mut prev = None;
    for (i, w) in b.windows(2).enumerate() {
        let g = centroid_1d(law, w[0], w[1]).unwrap_or(0.5 * (w[0] + w[1]));
        if let Some(p) = prev {
            out[i - 1] = 0.5 * (p + g);
        }
        prev = Some(g);
    }
}

fn sorted_boundaries(law: &SourceLaw, x: &[f64]) -> Result<Vec<f64>> {
    let (m, big_m) = interval(law)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { index: 0 });
    }
    let mut s: Vec<f64> = x.iter().map(|v| v.clamp(m, big_m)).collect();
    s.sort_by(f64::total_cmp);
    boundaries(law, &s)
}

fn cell_distortion(law: &SourceLaw, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let g = match centroid_1d(law, a, b) {
        Ok(g) => g,
        Err(Error::DegenerateCell { .. }) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    adaptive_simpson(&|u| (g - u) * (g - u) * law.density(&[u]), a, b, QUADRATURE_TOL)
}

/// `E (Q_x(X) − X)²` summed over the `n + 1` cells cut by `x`.
pub fn distortion_1d(law: &SourceLaw, x: &[f64]) -> Result<f64> {
    check_ordered(law, x)?;
    let b = boundaries(law, x)?;
    b.windows(2).map(|w| cell_distortion(law, w[0], w[1])).sum()
}

/// Distortion of the sorted, clamped codebook; NaN when quadrature fails.
pub(crate) fn distortion_1d_total(law: &SourceLaw, x: &[f64]) -> f64 {
    let Ok(b) = sorted_boundaries(law, x) else { return f64::NAN };
    b.windows(2).map(|w| cell_distortion(law, w[0], w[1])).sum::<Result<f64>>().unwrap_or(f64::NAN)
}

/// Closed-form gradient `∂V/∂xⁱ = ρ(xⁱ) ((gⁱ − xⁱ)² − (gⁱ⁺¹ − xⁱ)²)` of the
/// sorted, clamped codebook; only meaningful on ordered inputs.
pub(crate) fn distortion_gradient_1d(law: &SourceLaw, x: &[f64]) -> Vec<f64> {
    let Ok(b) = sorted_boundaries(law, x) else { return vec![f64::NAN; x.len()] };
    let g: Vec<f64> = b.windows(2).map(|w| centroid_1d(law, w[0], w[1]).unwrap_or(0.5 * (w[0] + w[1]))).collect();
    (0..x.len())
        .map(|i| {
            let xi = b[i + 1];
            law.density(&[xi]) * ((g[i] - xi).powi(2) - (g[i + 1] - xi).powi(2))
        })
        .collect()
}

/// Brute-force minimizers of `b ↦ Σ ∫_{cell i} (bⁱ − u)² μ(du)` over a grid of
/// `resolution + 1` equispaced levels in `[m, M]`, cell by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOracle {
    pub argmins: Vec<f64>,
    pub grid_step: f64,
}

pub fn lemma_a1_oracle(law: &SourceLaw, a: &[f64], resolution: usize) -> Result<LevelOracle> {
    let (m, big_m) = interval(law)?;
    if resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be positive".into()));
    }
    if a.windows(2).any(|w| w[0] > w[1]) || a.iter().any(|v| *v < m || *v > big_m) {
        return Err(Error::InvalidArgument("cell boundaries must be ordered inside the support".into()));
    }
    let b = boundaries(law, a)?;
    let step = (big_m - m) / resolution as f64;
    let mut argmins = Vec::with_capacity(b.len() - 1);
    for w in b.windows(2) {
        let (m0, m1, m2) = moments(law, w[0], w[1])?;
        let (mut best, mut arg) = (f64::INFINITY, m);
        for k in 0..=resolution {
            let level = m + step * k as f64;
            let obj = level * level * m0 - 2.0 * level * m1 + m2;
            if obj < best {
                best = obj;
                arg = level;
            }
        }
        argmins.push(arg);
    }
    Ok(LevelOracle { argmins, grid_step: step })
}

/// Brute-force minimizers of `a ↦ Σ ∫_{aⁱ⁻¹}^{aⁱ} (bⁱ − u)² μ(du)` over a grid
/// of boundaries. The objective splits into one term per boundary, so each
/// boundary is scanned on its own. When two consecutive levels coincide the
/// term is constant and every grid point is optimal; the whole scanned range
/// is then reported as the flat set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOracle {
    pub argmins: Vec<f64>,
    /// `Some((lo, hi))` when the minimizing grid points span more than one cell.
    pub flat_sets: Vec<Option<(f64, f64)>>,
    pub grid_step: f64,
}

pub fn lemma_a2_oracle(law: &SourceLaw, levels: &[f64], resolution: usize) -> Result<BoundaryOracle> {
    let (m, big_m) = interval(law)?;
    if resolution == 0 || levels.len() < 2 {
        return Err(Error::InvalidArgument("need a positive resolution and at least two levels".into()));
    }
    let step = (big_m - m) / resolution as f64;
    let grid: Vec<f64> = (0..=resolution).map(|k| m + step * k as f64).collect();
    // running moments ∫_m^t u^j μ(du) on the grid
    let mut cum = vec![(0.0, 0.0, 0.0); grid.len()];
    for k in 1..grid.len() {
        let (a0, a1, a2) = moments(law, grid[k - 1], grid[k])?;
        let p = cum[k - 1];
        cum[k] = (p.0 + a0, p.1 + a1, p.2 + a2);
    }
    let mut argmins = Vec::new();
    let mut flat_sets = Vec::new();
    for w in levels.windows(2) {
        let (bl, br) = (w[0], w[1]);
        // ∫_m^t ((bl − u)² − (br − u)²) μ(du), linear in the running moments
        let obj: Vec<f64> = cum.iter().map(|c| (bl * bl - br * br) * c.0 - 2.0 * (bl - br) * c.1).collect();
        let best = obj.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = obj.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(1e-300);
        let ties: Vec<usize> = (0..obj.len()).filter(|k| obj[*k] <= best + 1e-13 * scale).collect();
        let first = ties[0];
        let last = *ties.last().expect("nonempty");
        argmins.push(grid[first]);
        flat_sets.push((last > first + 1).then(|| (grid[first], grid[last])));
    }
    Ok(BoundaryOracle { argmins, flat_sets, grid_step: step })
}
