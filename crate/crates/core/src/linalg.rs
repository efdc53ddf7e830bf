//! Central finite differences and small dense-matrix helpers.

use nalgebra::{DMatrix, DVector};

/// Relative step for first derivatives.
pub const GRADIENT_STEP: f64 = 1e-6;
/// Relative step for second derivatives.
pub const HESSIAN_STEP: f64 = 1e-4;

fn step_for(xi: f64, rel: f64) -> f64 {
    rel * (1.0 + xi.abs())
}

pub fn fd_gradient<F: Fn(&[f64]) -> f64 + ?Sized>(v: &F, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step_for(x[i], GRADIENT_STEP);
            probe[i] = x[i] + h;
            let up = v(&probe);
            probe[i] = x[i] - h;
            let down = v(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Hessian from second differences of `v`, symmetrized.
pub fn fd_hessian<F: Fn(&[f64]) -> f64 + ?Sized>(v: &F, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let hs: Vec<f64> = x.iter().map(|&xi| step_for(xi, HESSIAN_STEP)).collect();
    let centre = v(x);
    let mut probe = x.to_vec();
    let mut eval = |shifts: &[(usize, f64)]| {
        for &(i, s) in shifts {
            probe[i] += s;
        }
        let val = v(&probe);
        for &(i, _) in shifts {
            probe[i] = x[i];
        }
        val
    };
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        let hi = hs[i];
        h[(i, i)] = (eval(&[(i, hi)]) - 2.0 * centre + eval(&[(i, -hi)])) / (hi * hi);
        for j in 0..i {
            let hj = hs[j];
            let pp = eval(&[(i, hi), (j, hj)]);
            let pm = eval(&[(i, hi), (j, -hj)]);
            let mp = eval(&[(i, -hi), (j, hj)]);
            let mm = eval(&[(i, -hi), (j, -hj)]);
            let val = (pp - pm - mp + mm) / (4.0 * hi * hj);
            h[(i, j)] = val;
            h[(j, i)] = val;
        }
    }
    h
}

/// Hessian as the central-difference Jacobian of a gradient, symmetrized.
pub fn fd_hessian_from_gradient<G: Fn(&[f64]) -> Vec<f64> + ?Sized>(grad: &G, x: &[f64]) -> DMatrix<f64> {
    let j = fd_jacobian(&|p: &[f64], out: &mut [f64]| out.copy_from_slice(&grad(p)), x, x.len());
    (&j + j.transpose()) * 0.5
}

/// Central-difference Jacobian of `f: R^n -> R^m`.
pub fn fd_jacobian<F: Fn(&[f64], &mut [f64]) + ?Sized>(f: &F, x: &[f64], m: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    let mut up = vec![0.0; m];
    let mut down = vec![0.0; m];
    for j in 0..n {
        let h = step_for(x[j], GRADIENT_STEP);
        probe[j] = x[j] + h;
        f(&probe, &mut up);
        probe[j] = x[j] - h;
        f(&probe, &mut down);
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

/// Ascending eigenvalues of the symmetric part of `m`.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn to_dvector(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

/// Row-major flattening, used for CSV output.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivatives_are_recovered() {
        let v = |x: &[f64]| 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1] * x[1];
        let g = fd_gradient(&v, &[1.0, -2.0]);
        assert!((g[0] - (6.0 - 2.0)).abs() < 1e-7);
        assert!((g[1] - (1.0 + 8.0)).abs() < 1e-7);
        let h = fd_hessian(&v, &[1.0, -2.0]);
        assert!((h[(0, 0)] - 6.0).abs() < 1e-6);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-6);
        assert!((h[(1, 1)] + 4.0).abs() < 1e-6);
    }

    #[test]
    fn jacobian_of_linear_map() {
        let f = |x: &[f64], out: &mut [f64]| {
            out[0] = 2.0 * x[0] - x[1];
            out[1] = 0.5 * x[1];
        };
        let j = fd_jacobian(&f, &[0.3, 0.7], 2);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 0.0, 0.5]);
        assert!((j - expected).abs().max() < 1e-8);
    }

    #[test]
    fn eigenvalues_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -3.0]);
        assert_eq!(symmetric_eigenvalues(&m), vec![-3.0, 1.0]);
    }
}
