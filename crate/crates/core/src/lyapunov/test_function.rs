//! Bounded C² test functions `W = φ₃∘φ₂∘φ₁∘V` that are strictly concave at a
//! chosen maximum of `V`, have vanishing Hessian at the remaining fixed points
//! and inherit `W∘f ≤ W` from the descent property of `V`.
//!
//! * `φ₁` is the identity below `K` and flat above it, which bounds `W` from
//!   above.
//! * `φ₂` is flat around every lower fixed-point level and the identity around
//!   `V(x*)`.
//! * `φ₃` is flat far below `V(x*)`, which bounds `W` from below.

use nalgebra::DMatrix;

use super::reparam::{build_reparam, Interval, SmoothReparam};
use super::LyapunovSpec;
use crate::equilibria::{self, Classification};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionOptions {
    /// Blend width of every reparametrization. Defaults to a quarter of the
    /// smallest gap between distinct levels among the fixed points and `K`.
    pub blend_width: Option<f64>,
    pub degeneracy_tol: f64,
    /// Relative tolerance for "equal level" in the symmetric pair builder.
    pub level_tol: f64,
}

impl Default for TestFunctionOptions {
    fn default() -> Self {
        Self { blend_width: None, degeneracy_tol: equilibria::DEGENERACY_TOL, level_tol: 1e-9 }
    }
}

#[derive(Debug, Clone)]
enum Body {
    Composite { v: LyapunovSpec, phis: [SmoothReparam; 3] },
    Constant(f64),
}

#[derive(Debug, Clone)]
pub struct TestFunction {
    dim: usize,
    body: Body,
    targets: Vec<Vec<f64>>,
    others: Vec<Vec<f64>>,
    k: f64,
    blend_width: f64,
    bound: f64,
}

impl TestFunction {
    /// `W ≡ c`.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            dim,
            body: Body::Constant(c),
            targets: Vec::new(),
            others: Vec::new(),
            k: f64::NAN,
            blend_width: f64::NAN,
            bound: c.abs(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Maximizers at which `∇²W ≺ 0` by construction.
    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// Fixed points at which `∇²W = 0` by construction.
    pub fn others(&self) -> &[Vec<f64>] {
        &self.others
    }

    pub fn cap(&self) -> f64 {
        self.k
    }

    pub fn blend_width(&self) -> f64 {
        self.blend_width
    }

    /// Declared bound on `sup |W|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn reparams(&self) -> Option<&[SmoothReparam; 3]> {
        match &self.body {
            Body::Composite { phis, .. } => Some(phis),
            Body::Constant(_) => None,
        }
    }

    /// `(φ(u), φ'(u), φ''(u))` for the composite `φ = φ₃∘φ₂∘φ₁`.
    pub fn compose(&self, u: f64) -> (f64, f64, f64) {
        match &self.body {
            Body::Constant(c) => (*c, 0.0, 0.0),
            Body::Composite { phis, .. } => compose(phis, u),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.body {
            Body::Constant(c) => *c,
            Body::Composite { v, phis } => compose(phis, v.value(x)).0,
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.body {
            Body::Constant(_) => vec![0.0; self.dim],
            Body::Composite { v, phis } => {
                let d1 = compose(phis, v.value(x)).1;
                v.gradient(x).into_iter().map(|g| d1 * g).collect()
            }
        }
    }

    /// `∇²W = φ'(V) ∇²V + φ''(V) ∇V ∇Vᵀ`.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.body {
            Body::Constant(_) => DMatrix::zeros(self.dim, self.dim),
            Body::Composite { v, phis } => {
                let (_, d1, d2) = compose(phis, v.value(x));
                let mut h = if d1 == 0.0 { DMatrix::zeros(self.dim, self.dim) } else { v.hessian(x) * d1 };
                if d2 != 0.0 {
                    let g = linalg::to_dvector(&v.gradient(x));
                    h += &g * g.transpose() * d2;
                }
                h
            }
        }
    }
}

fn compose(phis: &[SmoothReparam; 3], u: f64) -> (f64, f64, f64) {
    let (a, a1, a2) = phis[0].eval(u);
    let (b, b1, b2) = phis[1].eval(a);
    let (c, c1, c2) = phis[2].eval(b);
    let g1 = b1 * a1;
    let g2 = b2 * a1 * a1 + b1 * a2;
    (c, c1 * g1, c2 * g1 * g1 + c1 * g2)
}

/// Test function for a single strict maximum `x*` of `V` among the fixed points.
pub fn build_test_function(
    v: &LyapunovSpec,
    x_star: &[f64],
    other_fps: &[Vec<f64>],
    k: f64,
    opts: &TestFunctionOptions,
) -> Result<TestFunction> {
    check_target(v, x_star, opts)?;
    assemble(v, vec![x_star.to_vec()], other_fps, k, opts)
}

/// Test function with `∇²W ≺ 0` at both points of a pair of maxima sharing
/// one level of `V`. A pair of identical points reduces to
/// [`build_test_function`].
pub fn build_symmetric_pair_test_function(
    v: &LyapunovSpec,
    pair: (&[f64], &[f64]),
    other_fps: &[Vec<f64>],
    k: f64,
    opts: &TestFunctionOptions,
) -> Result<TestFunction> {
    let (p, q) = pair;
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    if p == q {
        return build_test_function(v, p, other_fps, k, opts);
    }
    check_target(v, p, opts)?;
    check_target(v, q, opts)?;
    let (vp, vq) = (v.value(p), v.value(q));
    if (vp - vq).abs() > opts.level_tol * vp.abs().max(vq.abs()).max(1.0) {
        return Err(Error::Precondition(format!("pair levels differ: V = {vp} and V = {vq}")));
    }
    assemble(v, vec![p.to_vec(), q.to_vec()], other_fps, k, opts)
}

fn check_target(v: &LyapunovSpec, x: &[f64], opts: &TestFunctionOptions) -> Result<()> {
    if x.len() != v.dim() {
        return Err(Error::DimensionMismatch { expected: v.dim(), got: x.len() });
    }
    match equilibria::classify(v, x, opts.degeneracy_tol)? {
        Classification::StrictLocalMax => Ok(()),
        other => Err(Error::Precondition(format!("{x:?} is {}, not a strict local max of V", other.as_str()))),
    }
}

fn assemble(
    v: &LyapunovSpec,
    targets: Vec<Vec<f64>>,
    other_fps: &[Vec<f64>],
    k: f64,
    opts: &TestFunctionOptions,
) -> Result<TestFunction> {
    let top = targets.iter().map(|x| v.value(x)).fold(f64::NEG_INFINITY, f64::max);
    if !(k > top) {
        return Err(Error::Precondition(format!("cap K = {k} must exceed V(x*) = {top}")));
    }
    let mut levels = Vec::with_capacity(other_fps.len());
    for x in other_fps {
        if x.len() != v.dim() {
            return Err(Error::DimensionMismatch { expected: v.dim(), got: x.len() });
        }
        let l = v.value(x);
        if l > top {
            return Err(Error::Precondition(format!("fixed point {x:?} has V = {l} above V(x*) = {top}")));
        }
        levels.push(l);
    }

    let w = match opts.blend_width {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => return Err(Error::InvalidArgument(format!("blend width must be positive, got {w}"))),
        None => default_blend(&levels, top, k),
    };
    for l in &levels {
        if (top - l).abs() < 4.0 * w {
            return Err(Error::InsufficientSeparation { target: top, other: *l, required: 4.0 * w });
        }
    }

    let w1 = w.min((k - top) / 4.0);
    let phi1 = build_reparam(&[Interval::new(k, f64::INFINITY)], Interval::new(f64::NEG_INFINITY, k - 3.0 * w1), w1)?;

    let mut distinct = levels.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let flats: Vec<Interval> = distinct.iter().map(|l| Interval::new(l - 0.5 * w, l + 0.5 * w)).collect();
    let phi2 = build_reparam(&flats, Interval::new(top - 0.5 * w, top + 0.5 * w), w)?;

    let cut = phi2.value(top - 0.5 * w) - 4.0 * w;
    let phi3 = build_reparam(&[Interval::new(f64::NEG_INFINITY, cut)], Interval::new(cut + 3.0 * w, f64::INFINITY), w)?;

    let phis = [phi1, phi2, phi3];
    let upper = phis[2].value(phis[1].value(phis[0].limits().1));
    let lower = phis[2].limits().0;
    Ok(TestFunction {
        dim: v.dim(),
        body: Body::Composite { v: v.clone(), phis },
        targets,
        others: other_fps.to_vec(),
        k,
        blend_width: w,
        bound: upper.abs().max(lower.abs()),
    })
}

fn default_blend(levels: &[f64], top: f64, k: f64) -> f64 {
    let mut all: Vec<f64> = levels.iter().copied().chain([top, k]).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let gap = all.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    gap / 4.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractReport {
    /// `max (W(f(x)) − W(x))` over the probes.
    pub max_increase: f64,
    /// `λ_max(∇²W)` at each target.
    pub target_max_eigenvalues: Vec<f64>,
    /// Largest `|∇²W|` entry over the other fixed points.
    pub max_hessian_at_others: f64,
    /// `max |W|` over the probes.
    pub max_abs_value: f64,
    pub passed: bool,
}

pub const MONOTONICITY_TOL: f64 = 1e-10;
pub const FLAT_HESSIAN_TOL: f64 = 1e-8;

/// Checks `W∘f ≤ W`, the curvature at the targets, the flatness at the other
/// fixed points and the declared bound on a probe set.
pub fn verify_contract<F>(w: &TestFunction, f: &F, probes: &[Vec<f64>]) -> ContractReport
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let mut fx = vec![0.0; w.dim()];
    let mut max_increase = f64::NEG_INFINITY;
    let mut max_abs_value = 0.0_f64;
    for x in probes {
        f(x, &mut fx);
        let wx = w.value(x);
        max_increase = max_increase.max(w.value(&fx) - wx);
        max_abs_value = max_abs_value.max(wx.abs());
    }
    let target_max_eigenvalues: Vec<f64> = w
        .targets()
        .iter()
        .map(|x| *linalg::symmetric_eigenvalues(&w.hessian(x)).last().expect("nonempty spectrum"))
        .collect();
    let max_hessian_at_others = w.others().iter().map(|x| linalg::max_abs_entry(&w.hessian(x))).fold(0.0, f64::max);
    let passed = max_increase <= MONOTONICITY_TOL
        && target_max_eigenvalues.iter().all(|l| *l < 0.0)
        && max_hessian_at_others < FLAT_HESSIAN_TOL
        && max_abs_value <= w.bound() * (1.0 + 1e-12);
    ContractReport { max_increase, target_max_eigenvalues, max_hessian_at_others, max_abs_value, passed }
}
