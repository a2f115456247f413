//! The stability form
//! `I*(h) = ∫|h'|² - omega1 h(0)² - omega2 h(l)² - kappa² ∫|h|²`,
//! its minimum over mean-free fields, the piecewise-linear test function
//! `gbar` with its closed-form values, and the sharp endpoint trace constant.

use crate::error::{Error, Result};
use crate::model::{Grid1D, HeightField, ModelParams};
use crate::spectrum::null_space_basis;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormParts {
    /// `∫|h'|²`
    pub gradient: f64,
    /// `omega1 h(0)² + omega2 h(l)²`
    pub boundary: f64,
    /// `kappa² ∫|h|²`
    pub curvature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormReport {
    pub value: f64,
    pub parts: FormParts,
    /// `h` is mean-free and attains the constrained minimum of `I*/|h|²`
    /// (relative tolerance 1e-8).
    pub minimizer_flag: bool,
}

fn parts(grid: &Grid1D, v: &[f64], p: &ModelParams) -> FormParts {
    let n = v.len();
    FormParts {
        gradient: grid.grad_sq(v),
        boundary: p.omega1 * v[0] * v[0] + p.omega2 * v[n - 1] * v[n - 1],
        curvature: p.kappa * p.kappa * grid.l2_sq(v),
    }
}

/// `I*(h)` without the minimizer check.
pub fn form_value(h: &HeightField, p: &ModelParams) -> f64 {
    let q = parts(&h.grid, h.values.as_slice(), p);
    q.gradient - q.boundary - q.curvature
}

pub fn quadratic_form(h: &HeightField, p: &ModelParams) -> Result<FormReport> {
    let parts = parts(&h.grid, h.values.as_slice(), p);
    let value = parts.gradient - parts.boundary - parts.curvature;
    let norm_sq = h.grid.l2_sq(h.values.as_slice());
    let mean_free = h.mean().abs() <= 1e-10 * (norm_sq / h.grid.l()).sqrt();
    let minimizer_flag = if mean_free && norm_sq > 0.0 {
        let (mu, _) = min_form_meanfree(p, &h.grid)?;
        (value / norm_sq - mu).abs() <= 1e-8 * mu.abs().max(1.0)
    } else {
        false
    };
    Ok(FormReport {
        value,
        parts,
        minimizer_flag,
    })
}

/// Matrix of `I*` on nodal coefficients.
fn form_matrix(grid: &Grid1D, p: &ModelParams) -> DMatrix<f64> {
    let n = grid.n();
    let mut a = grid.stiffness() - grid.mass() * (p.kappa * p.kappa);
    a[(0, 0)] -= p.omega1;
    a[(n - 1, n - 1)] -= p.omega2;
    a
}

/// Smallest generalized eigenpair of `(A, B)` with `B` positive definite.
fn smallest_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let m = a.nrows();
    let l = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::EigensolverFailure("mass matrix not positive definite".into()))?
        .l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::EigensolverFailure("singular mass factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigensolverFailure("symmetric eigensolver did not converge".into()))?;
    let i = eig.eigenvalues.imin();
    let y = linv.transpose() * eig.eigenvectors.column(i);
    Ok((eig.eigenvalues[i], y))
}

/// Minimum of `I*(h)/∫h²` over mean-free fields on the grid (natural
/// boundary conditions), with a unit-L2, mean-free minimizer.
pub fn min_form_meanfree(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<(f64, HeightField)> {
    let n = grid.n();
    let mean_row = DMatrix::from_row_slice(1, n, grid.weights());
    let q = null_space_basis(&mean_row)?;
    let qt = q.transpose();
    let a = &qt * form_matrix(grid, p) * &q;
    let b = &qt * grid.mass() * &q;
    let (mu, y) = smallest_pair(&((&a + a.transpose()) * 0.5), &((&b + b.transpose()) * 0.5))?;
    let mut v = q * y;
    let norm = grid.l2_sq(v.as_slice()).sqrt();
    v /= norm;
    Ok((mu, HeightField::new(grid.clone(), v)?))
}

/// Sharp discrete constant in `h(0)² <= delta ∫|h'|² + C ∫|h|²`: the largest
/// eigenvalue of `e0 e0^T - delta K` against the mass matrix.
pub fn trace_constant(delta: f64, l: f64, grid: &Grid1D) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    if (grid.l() - l).abs() > 1e-12 * l {
        return Err(Error::InvalidGrid(format!(
            "grid length {} differs from l = {l}",
            grid.l()
        )));
    }
    let mut a = -grid.stiffness() * delta;
    a[(0, 0)] += 1.0;
    let (m, _) = smallest_pair(&(-a), grid.mass())?;
    Ok(-m)
}

/// Grid with breakpoints `0, eps, l/2, l - eps, l`, each piece split into
/// `pieces` equal cells, on which `gbar` is represented exactly.
pub fn gbar_grid(eps: f64, l: f64, pieces: usize) -> Result<Grid1D> {
    let marks = [0.0, eps, 0.5 * l, l - eps, l];
    let mut nodes = vec![0.0];
    for w in marks.windows(2) {
        for j in 1..=pieces {
            nodes.push(if j == pieces {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * j as f64 / pieces as f64
            });
        }
    }
    let n = nodes.len();
    Grid1D::piecewise_linear(nodes, n - 1)
}

/// Closed-form `gbar` on `[0, l]`: `1 - omega1 s` on `[0, eps]`, linear down
/// to `0` at `l/2`, then `-gbar(l - s)`.
pub fn gbar_value(s: f64, eps: f64, omega1: f64, l: f64) -> f64 {
    let half = 0.5 * l;
    if s > half {
        return -gbar_value(l - s, eps, omega1, l);
    }
    let top = 1.0 - omega1 * eps;
    if s <= eps {
        1.0 - omega1 * s
    } else {
        top * (half - s) / (half - eps)
    }
}

/// `gbar` sampled on [`gbar_grid`] with 8 cells per piece.
pub fn test_function_gbar(eps: f64, p: &ModelParams) -> Result<HeightField> {
    let limit = 0.25 * p.l;
    if !(eps > 0.0) || eps >= limit {
        return Err(Error::EpsTooLarge { eps, limit });
    }
    let grid = Arc::new(gbar_grid(eps, p.l, 8)?);
    let (w, l) = (p.omega1, p.l);
    Ok(HeightField::from_fn(grid, move |s| gbar_value(s, eps, w, l)))
}

/// `eps omega² + (1 - omega eps)²/(l/2 - eps) - omega`: the form of `gbar`
/// on the left half with `kappa = 0`; the full form is twice this.
pub fn gbar_half_form_flat(eps: f64, omega: f64, l: f64) -> f64 {
    eps * omega * omega + (1.0 - omega * eps).powi(2) / (0.5 * l - eps) - omega
}

/// Value at `x = 0` of the interpolating polynomial through `(xs, ys)`
/// (Neville), used to extrapolate `eps -> 0`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut p = ys.to_vec();
    let n = xs.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i]);
        }
    }
    p[0]
}

/// `2/l - omega1 - kappa² l / 6`.
pub fn curved_bracket_limit(p: &ModelParams) -> f64 {
    2.0 / p.l - p.omega1 - p.kappa * p.kappa * p.l / 6.0
}
