//! Ready-made example systems with ground-truth fixed points.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemSpec;
use crate::equilibria::Classification;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovSpec;
use crate::quantizer;
use crate::region::BoxRegion;
use crate::rng::NoiseLaw;

/// Largest RK4 substep used by [`flow_map`].
pub const MAX_SUBSTEP: f64 = 0.01;

fn substeps(u0: f64) -> usize {
    (u0 / MAX_SUBSTEP).ceil().max(1.0) as usize
}

/// Time-`u0` map of `ẋ = −field(x)` by classical RK4 with substep
/// `u0 / ⌈u0 / 0.01⌉`. Writes NaN on blow-up.
pub fn flow_into<F>(field: &F, u0: f64, x: &[f64], out: &mut [f64])
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    rk4(field, u0, substeps(u0), x, out)
}

fn rk4<F>(field: &F, u0: f64, n: usize, x: &[f64], out: &mut [f64])
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    let d = x.len();
    let h = u0 / n as f64;
    let mut y = x.to_vec();
    let mut k = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    let mut tmp = vec![0.0; d];
    for _ in 0..n {
        field(&y, &mut k[0]);
        for i in 0..d {
            tmp[i] = y[i] - 0.5 * h * k[0][i];
        }
        field(&tmp, &mut k[1]);
        for i in 0..d {
            tmp[i] = y[i] - 0.5 * h * k[1][i];
        }
        field(&tmp, &mut k[2]);
        for i in 0..d {
            tmp[i] = y[i] - h * k[2][i];
        }
        field(&tmp, &mut k[3]);
        for i in 0..d {
            y[i] -= h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            out.fill(f64::NAN);
            return;
        }
    }
    out.copy_from_slice(&y);
}

pub fn flow_map<F>(field: &F, u0: f64, x: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) + ?Sized,
{
    if !(u0 > 0.0 && u0.is_finite()) {
        return Err(Error::InvalidArgument(format!("flow time must be positive, got {u0}")));
    }
    let mut out = vec![0.0; x.len()];
    flow_into(field, u0, x, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { chain: None, step: 0, state: x.to_vec() });
    }
    Ok(out)
}

fn flow_spec<F>(dim: usize, u0: f64, field: F) -> SystemSpec
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
{
    SystemSpec::from_fn(dim, move |x, out| flow_into(&field, u0, x, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownFixedPoint {
    pub location: Vec<f64>,
    /// Sign pattern of `∇²V`; `None` when the card has no usable `V`.
    pub classification: Option<Classification>,
    pub stable: bool,
}

impl KnownFixedPoint {
    fn new(location: Vec<f64>, classification: Option<Classification>, stable: bool) -> Self {
        Self { location, classification, stable }
    }
}

/// Default sweep parameters of a card.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDefaults {
    pub noise: NoiseLaw,
    pub gamma_grid: Vec<f64>,
    pub chains: usize,
    pub horizon: usize,
    pub burn_in: usize,
    pub radius: f64,
    pub init_box: BoxRegion,
    pub search_box: BoxRegion,
    /// Maxima targeted by the test function: none, one, or a symmetric pair.
    pub targets: Vec<Vec<f64>>,
    /// Cap `K` of the test function.
    pub cap: f64,
}

impl ExperimentDefaults {
    pub(crate) fn standard(noise: NoiseLaw, radius: f64, domain: &BoxRegion) -> Self {
        Self {
            noise,
            gamma_grid: vec![0.2, 0.1, 0.05, 0.02],
            chains: 8,
            horizon: 1_000_000,
            burn_in: 100_000,
            radius,
            init_box: domain.clone(),
            search_box: domain.clone(),
            targets: Vec::new(),
            cap: f64::NAN,
        }
    }
}

pub type SystemFactory = Arc<dyn Fn(NoiseLaw) -> SystemSpec + Send + Sync>;

#[derive(Clone)]
pub struct ModelCard {
    pub name: String,
    pub dim: usize,
    pub summary: String,
    pub parameters: Vec<(String, f64)>,
    factory: SystemFactory,
    pub lyapunov: Option<LyapunovSpec>,
    pub known_fixed_points: Vec<KnownFixedPoint>,
    pub defaults: ExperimentDefaults,
    /// `V∘f ≤ V` on the domain box.
    pub descent: bool,
    pub domain: BoxRegion,
    /// False when no nonconstant `V` is available and localization says nothing.
    pub localizable: bool,
    /// Built for this toolkit rather than taken from the classical examples.
    pub extension: bool,
}

impl fmt::Debug for ModelCard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelCard")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("parameters", &self.parameters)
            .field("known_fixed_points", &self.known_fixed_points)
            .finish_non_exhaustive()
    }
}

impl ModelCard {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        name: &str,
        summary: &str,
        parameters: Vec<(String, f64)>,
        factory: SystemFactory,
        lyapunov: Option<LyapunovSpec>,
        known_fixed_points: Vec<KnownFixedPoint>,
        defaults: ExperimentDefaults,
        domain: BoxRegion,
    ) -> Self {
        let dim = domain.dim();
        let localizable = lyapunov.is_some();
        Self {
            name: name.into(),
            dim,
            summary: summary.into(),
            parameters,
            factory,
            descent: localizable,
            lyapunov,
            known_fixed_points,
            defaults,
            domain,
            localizable,
            extension: false,
        }
    }

    /// The system with the card's default noise law.
    pub fn system(&self) -> SystemSpec {
        (self.factory)(self.defaults.noise.clone())
    }

    pub fn system_with(&self, noise: NoiseLaw) -> SystemSpec {
        (self.factory)(noise)
    }

    pub fn fixed_point_locations(&self) -> Vec<Vec<f64>> {
        self.known_fixed_points.iter().map(|p| p.location.clone()).collect()
    }

    pub fn lyapunov(&self) -> Result<&LyapunovSpec> {
        self.lyapunov
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("model `{}` has no Lyapunov function", self.name)))
    }
}

/// Parameters accepted by [`make_model`]; unset fields take the card defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codepoints: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<quantizer::SourceLaw>,
}

pub const MODEL_NAMES: [&str; 8] = [
    "double_well",
    "quartic_saddle",
    "lemniscate",
    "coordination_game",
    "tent_map",
    "contracting_borel",
    "lloyd_1d",
    "lloyd_2d",
];

pub fn make_model(name: &str, p: &ModelParams) -> Result<ModelCard> {
    match name {
        "double_well" => make_double_well(p.u0.unwrap_or(0.5)),
        "quartic_saddle" => make_quartic_saddle(p.u0.unwrap_or(0.5)),
        "lemniscate" => make_lemniscate(p.u0.unwrap_or(0.5), p.theta_scale.unwrap_or(1.0)),
        "coordination_game" => Ok(make_coordination_game()),
        "tent_map" => Ok(make_tent_map()),
        "contracting_borel" => make_contracting_borel(p.a.unwrap_or(0.5)),
        "lloyd_1d" => lloyd_card(p.law.unwrap_or(quantizer::SourceLaw::Uniform1d), 1, p.codepoints.unwrap_or(2)),
        "lloyd_2d" => lloyd_card(p.law.unwrap_or(quantizer::SourceLaw::UniformSquare), 2, p.codepoints.unwrap_or(4)),
        other => Err(Error::UnknownModel(other.into())),
    }
}

fn lloyd_card(law: quantizer::SourceLaw, dim: usize, n: usize) -> Result<ModelCard> {
    if law.dim() != dim {
        return Err(Error::InvalidArgument(format!("law {} is not {dim}-dimensional", law.name())));
    }
    quantizer::perturbed_lloyd_card(law, n)
}

/// Every card with default parameters.
pub fn registry() -> Vec<ModelCard> {
    MODEL_NAMES.iter().map(|n| make_model(n, &ModelParams::default()).expect("default cards build")).collect()
}

fn check_u0(u0: f64) -> Result<()> {
    if u0 > 0.0 && u0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("u0 must be positive, got {u0}")))
    }
}

/// Time-`u0` gradient flow of `V(x) = x⁴/4 − x²/2`.
pub fn make_double_well(u0: f64) -> Result<ModelCard> {
    check_u0(u0)?;
    let v = LyapunovSpec::new(1, |x| 0.25 * x[0].powi(4) - 0.5 * x[0] * x[0])
        .with_gradient(|x| vec![x[0].powi(3) - x[0]])
        .with_hessian(|x| DMatrix::from_element(1, 1, 3.0 * x[0] * x[0] - 1.0))
        .coercive(true);
    let factory: SystemFactory =
        Arc::new(move |noise| flow_spec(1, u0, |x, out| out[0] = x[0] * x[0] * x[0] - x[0]).with_noise(noise));
    let domain = BoxRegion::cube(1, -2.0, 2.0);
    let mut defaults = ExperimentDefaults::standard(NoiseLaw::Gaussian, 0.3, &domain);
    defaults.targets = vec![vec![0.0]];
    defaults.cap = 1.0;
    Ok(ModelCard::new(
        "double_well",
        "gradient flow of a symmetric double-well potential; unstable equilibrium at 0",
        vec![("u0".into(), u0)],
        factory,
        Some(v),
        vec![
            KnownFixedPoint::new(vec![-1.0], Some(Classification::StrictLocalMin), true),
            KnownFixedPoint::new(vec![0.0], Some(Classification::StrictLocalMax), false),
            KnownFixedPoint::new(vec![1.0], Some(Classification::StrictLocalMin), true),
        ],
        defaults,
        domain,
    ))
}

/// Time-`u0` gradient flow of `V(x, y) = (x² − y²)/2 + (x⁴ + y⁴)/4`, a
/// nondegenerate saddle at the origin between minima at `(0, ±1)`.
pub fn make_quartic_saddle(u0: f64) -> Result<ModelCard> {
    check_u0(u0)?;
    let v = LyapunovSpec::new(2, |x| 0.5 * (x[0] * x[0] - x[1] * x[1]) + 0.25 * (x[0].powi(4) + x[1].powi(4)))
        .with_gradient(|x| vec![x[0] + x[0].powi(3), -x[1] + x[1].powi(3)])
        .with_hessian(|x| {
            DMatrix::from_row_slice(2, 2, &[1.0 + 3.0 * x[0] * x[0], 0.0, 0.0, -1.0 + 3.0 * x[1] * x[1]])
        })
        .coercive(true);
    let factory: SystemFactory = Arc::new(move |noise| {
        flow_spec(2, u0, |x, out| {
            out[0] = x[0] + x[0] * x[0] * x[0];
            out[1] = -x[1] + x[1] * x[1] * x[1];
        })
        .with_noise(noise)
    });
    let domain = BoxRegion::cube(2, -2.0, 2.0);
    let mut card = ModelCard::new(
        "quartic_saddle",
        "planar gradient flow with a nondegenerate saddle between two wells",
        vec![("u0".into(), u0)],
        factory,
        Some(v),
        vec![
            KnownFixedPoint::new(vec![0.0, -1.0], Some(Classification::StrictLocalMin), true),
            KnownFixedPoint::new(vec![0.0, 0.0], Some(Classification::Saddle), false),
            KnownFixedPoint::new(vec![0.0, 1.0], Some(Classification::StrictLocalMin), true),
        ],
        ExperimentDefaults::standard(NoiseLaw::Gaussian, 0.3, &domain),
        domain,
    );
    card.extension = true;
    Ok(card)
}

/// Width of the band `|L| < LEMNISCATE_BAND` carrying the rotational correction.
pub const LEMNISCATE_BAND: f64 = 0.5;

fn lemniscate_l(x: &[f64]) -> (f64, [f64; 2]) {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let l = r2 * r2 / 16.0 - x[0] * x[1];
    (l, [r2 * x[0] / 4.0 - x[1], r2 * x[1] / 4.0 - x[0]])
}

/// `(V'(L), V''(L))` for `V = L² / (2 (1 + L²)^{3/4})`.
fn lemniscate_dv(l: f64) -> (f64, f64) {
    let s = 1.0 + l * l;
    // s^{-7/4} and s^{-11/4} without powf
    let q = s.sqrt().sqrt();
    let s74 = 1.0 / (s * q * q * q);
    let s114 = s74 / s;
    (l * (1.0 + 0.25 * l * l) * s74, (1.0 - 1.75 * l * l - 0.125 * l.powi(4)) * s114)
}

fn lemniscate_v(x: &[f64]) -> f64 {
    let (l, _) = lemniscate_l(x);
    let s = 1.0 + l * l;
    let q = s.sqrt().sqrt();
    l * l / (2.0 * q * q * q)
}

/// Time-`u0` flow of `h = ∇V + θ` where `V` is a function of the lemniscate
/// polynomial `L = r⁴/16 − x₁x₂` and `θ = c η(L) J∇L` rotates along level
/// sets of `L` near the curve `L = 0`, with `η(L) = (1 − (L/0.5)²)³` on the
/// band and `J` the quarter turn. Since `θ ⟂ ∇V`, `V` still descends.
pub fn make_lemniscate(u0: f64, theta_scale: f64) -> Result<ModelCard> {
    check_u0(u0)?;
    if !theta_scale.is_finite() {
        return Err(Error::InvalidArgument("theta_scale must be finite".into()));
    }
    let v = LyapunovSpec::new(2, lemniscate_v)
        .with_gradient(|x| {
            let (l, g) = lemniscate_l(x);
            let d1 = lemniscate_dv(l).0;
            vec![d1 * g[0], d1 * g[1]]
        })
        .with_hessian(|x| {
            let (l, g) = lemniscate_l(x);
            let (d1, d2) = lemniscate_dv(l);
            let r2 = x[0] * x[0] + x[1] * x[1];
            let hl = [(r2 + 2.0 * x[0] * x[0]) / 4.0, 0.5 * x[0] * x[1] - 1.0, (r2 + 2.0 * x[1] * x[1]) / 4.0];
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    d2 * g[0] * g[0] + d1 * hl[0],
                    d2 * g[0] * g[1] + d1 * hl[1],
                    d2 * g[0] * g[1] + d1 * hl[1],
                    d2 * g[1] * g[1] + d1 * hl[2],
                ],
            )
        })
        .coercive(true);
    let field = move |x: &[f64], out: &mut [f64]| {
        let (l, g) = lemniscate_l(x);
        let d1 = lemniscate_dv(l).0;
        let t = l / LEMNISCATE_BAND;
        let eta = if t.abs() < 1.0 { (1.0 - t * t).powi(3) } else { 0.0 };
        let c = theta_scale * eta;
        out[0] = d1 * g[0] - c * g[1];
        out[1] = d1 * g[1] + c * g[0];
    };
    let factory: SystemFactory = Arc::new(move |noise| flow_spec(2, u0, field).with_noise(noise));
    let domain = BoxRegion::cube(2, -3.0, 3.0);
    let s = std::f64::consts::SQRT_2;
    let mut defaults = ExperimentDefaults::standard(NoiseLaw::Gaussian, 0.4, &domain);
    defaults.targets = vec![vec![s, s], vec![-s, -s]];
    defaults.cap = 1.0;
    Ok(ModelCard::new(
        "lemniscate",
        "flow around a figure-eight level set with a degenerate critical point at the origin and two maxima",
        vec![("u0".into(), u0), ("theta_scale".into(), theta_scale)],
        factory,
        Some(v),
        vec![
            KnownFixedPoint::new(vec![-s, -s], Some(Classification::StrictLocalMax), false),
            KnownFixedPoint::new(vec![0.0, 0.0], Some(Classification::Degenerate), true),
            KnownFixedPoint::new(vec![s, s], Some(Classification::StrictLocalMax), false),
        ],
        defaults,
        domain,
    ))
}

/// Best response `f(x) = 1{x > ½}` (with `f(½) = ½`) on `[0, 1]`, uniform noise.
pub fn make_coordination_game() -> ModelCard {
    let v = LyapunovSpec::new(1, |x| (x[0] * (1.0 - x[0])).powi(2))
        .with_gradient(|x| vec![2.0 * x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[0])])
        .with_hessian(|x| DMatrix::from_element(1, 1, 12.0 * x[0] * x[0] - 12.0 * x[0] + 2.0));
    let factory: SystemFactory = Arc::new(|noise| {
        SystemSpec::from_fn(1, |x, out| {
            out[0] = if x[0] > 0.5 {
                1.0
            } else if x[0] < 0.5 {
                0.0
            } else {
                0.5
            }
        })
        .with_noise(noise)
        .with_projection(Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0].clamp(0.0, 1.0)))
        .with_discontinuity(Arc::new(|x: &[f64]| x[0] == 0.5))
    });
    let domain = BoxRegion::cube(1, 0.0, 1.0);
    let mut defaults = ExperimentDefaults::standard(NoiseLaw::Uniform, 0.05, &domain);
    defaults.targets = vec![vec![0.5]];
    defaults.cap = 0.125;
    ModelCard::new(
        "coordination_game",
        "pure best-response dynamics of a two-action coordination game",
        Vec::new(),
        factory,
        Some(v),
        vec![
            KnownFixedPoint::new(vec![0.0], Some(Classification::StrictLocalMin), true),
            KnownFixedPoint::new(vec![0.5], Some(Classification::StrictLocalMax), false),
            KnownFixedPoint::new(vec![1.0], Some(Classification::StrictLocalMin), true),
        ],
        defaults,
        domain,
    )
}

pub fn tent(x: f64) -> f64 {
    if (0.0..=0.5).contains(&x) {
        2.0 * x
    } else if x > 0.5 && x <= 1.0 {
        2.0 * (1.0 - x)
    } else {
        0.0
    }
}

/// Tent map: chaotic, no nonconstant Lyapunov function.
pub fn make_tent_map() -> ModelCard {
    let factory: SystemFactory = Arc::new(|noise| SystemSpec::from_fn(1, |x, out| out[0] = tent(x[0])).with_noise(noise));
    let domain = BoxRegion::cube(1, 0.0, 1.0);
    ModelCard::new(
        "tent_map",
        "chaotic tent map preserving Lebesgue measure; localization is uninformative",
        Vec::new(),
        factory,
        None,
        vec![
            KnownFixedPoint::new(vec![0.0], None, false),
            KnownFixedPoint::new(vec![2.0 / 3.0], None, false),
        ],
        ExperimentDefaults::standard(NoiseLaw::Uniform, 0.1, &domain),
        domain,
    )
}

/// `f(x) = a x s(x)` with `s(x) = sign(sin(1/|x|))` (`+1` on zeros of the sine).
pub fn make_contracting_borel(a: f64) -> Result<ModelCard> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidArgument(format!("contraction factor must lie in (0, 1), got {a}")));
    }
    let v = LyapunovSpec::new(1, |x| x[0] * x[0])
        .with_gradient(|x| vec![2.0 * x[0]])
        .with_hessian(|_| DMatrix::from_element(1, 1, 2.0))
        .coercive(true);
    let factory: SystemFactory = Arc::new(move |noise| {
        SystemSpec::from_fn(1, move |x, out| out[0] = contracting_borel(a, x[0]))
            .with_noise(noise)
            .with_discontinuity(Arc::new(|x: &[f64]| x[0] != 0.0 && (1.0 / x[0].abs()).sin() == 0.0))
    });
    let domain = BoxRegion::cube(1, -1.0, 1.0);
    Ok(ModelCard::new(
        "contracting_borel",
        "contraction with sign flips accumulating at the origin; continuous only at 0",
        vec![("a".into(), a)],
        factory,
        Some(v),
        vec![KnownFixedPoint::new(vec![0.0], Some(Classification::StrictLocalMin), true)],
        ExperimentDefaults::standard(NoiseLaw::Gaussian, 0.2, &domain),
        domain,
    ))
}

pub fn contracting_borel(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let s = if (1.0 / x.abs()).sin() < 0.0 { -1.0 } else { 1.0 };
    a * x * s
}
