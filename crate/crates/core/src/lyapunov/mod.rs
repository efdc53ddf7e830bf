//! Lyapunov functions, their bounded monotone reparametrizations, and the
//! drift / expansion / discontinuity diagnostics built on them.

mod diagnostics;
mod reparam;
mod test_function;

pub use diagnostics::{
    discontinuity_avoidance, drift_check, expansion_lhs, expansion_rhs, DiscontinuityReport, DriftReport,
};
pub use reparam::{build_reparam, Interval, SmoothReparam};
pub use test_function::{
    build_symmetric_pair_test_function, build_test_function, verify_contract, ContractReport, TestFunction,
    TestFunctionOptions,
};

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::dynamics::ScalarFn;
use crate::linalg;

pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A scalar function `V` with gradient and Hessian. Missing closed forms fall
/// back to central finite differences.
#[derive(Clone)]
pub struct LyapunovSpec {
    dim: usize,
    value: ScalarFn,
    gradient: Option<GradientFn>,
    hessian: Option<HessianFn>,
    coercive: bool,
}

impl fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("dim", &self.dim)
            .field("closed_form_gradient", &self.gradient.is_some())
            .field("closed_form_hessian", &self.hessian.is_some())
            .field("coercive", &self.coercive)
            .finish()
    }
}

impl LyapunovSpec {
    pub fn new<F>(dim: usize, value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { dim, value: Arc::new(value), gradient: None, hessian: None, coercive: false }
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian<H>(mut self, h: H) -> Self
    where
        H: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(h));
        self
    }

    pub fn coercive(mut self, coercive: bool) -> Self {
        self.coercive = coercive;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_coercive(&self) -> bool {
        self.coercive
    }

    pub fn value_fn(&self) -> ScalarFn {
        self.value.clone()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g(x),
            None => linalg::fd_gradient(self.value.as_ref(), x),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.hessian {
            Some(h) => h(x),
            None => self.fd_hessian(x),
        }
    }

    /// Finite-difference gradient, ignoring any closed form.
    pub fn fd_gradient(&self, x: &[f64]) -> Vec<f64> {
        linalg::fd_gradient(self.value.as_ref(), x)
    }

    /// Finite-difference Hessian from values of `V`, ignoring any closed form.
    pub fn fd_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        linalg::fd_hessian(self.value.as_ref(), x)
    }

    pub fn has_closed_form_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_closed_form_hessian(&self) -> bool {
        self.hessian.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_fallbacks_match_quadratic() {
        let v = LyapunovSpec::new(2, |x| x[0] * x[0] + 3.0 * x[0] * x[1]);
        let g = v.gradient(&[1.0, 2.0]);
        assert!((g[0] - 8.0).abs() < 1e-7 && (g[1] - 3.0).abs() < 1e-7);
        let h = v.hessian(&[1.0, 2.0]);
        assert!((h[(0, 0)] - 2.0).abs() < 1e-6 && (h[(0, 1)] - 3.0).abs() < 1e-6 && h[(1, 1)].abs() < 1e-6);
    }
}
