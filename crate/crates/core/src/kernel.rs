//! Equilibrium directions of the linearized operator: fields with
//! `h'' + kappa^2 h = c` (constant) satisfying both Robin conditions.
//!
//! Such a field is `c/kappa^2 + A cos(kappa s) + B sin(kappa s)` (or
//! `c s^2/2 + A + B s` when flat). Internally the basis
//! `(1 - cos kappa s)/kappa^2, cos kappa s, sin(kappa s)/kappa` is used,
//! which tends to `s^2/2, 1, s` as `kappa -> 0` without cancellation; the
//! kernel is the null space of the 2x3 Robin matrix in that basis.

use crate::error::{Error, Result};
use crate::model::{validate_params, Grid1D, HeightField, ModelParams};
use nalgebra::{DMatrix, Matrix2x3, Vector3};
use std::sync::Arc;

/// Relative singular-value threshold separating exact degeneracies from
/// roundoff.
const RANK_TOL: f64 = 1e-10;

/// The three basis functions and their derivatives at `s`.
fn basis_at(kappa: f64, s: f64) -> ([f64; 3], [f64; 3]) {
    if kappa == 0.0 {
        ([s * s / 2.0, 1.0, s], [s, 0.0, 1.0])
    } else {
        let k = kappa;
        let half = (0.5 * k * s).sin();
        let (c, sn) = ((k * s).cos(), (k * s).sin());
        ([2.0 * half * half / (k * k), c, sn / k], [sn / k, -k * sn, c])
    }
}

/// Integrals of the three basis functions over `(0, l)`.
fn basis_integrals(kappa: f64, l: f64) -> [f64; 3] {
    let z = kappa * l;
    if z.abs() < 1e-2 {
        let z2 = z * z;
        [
            l.powi(3) / 6.0 * (1.0 - z2 / 20.0 + z2 * z2 / 840.0),
            l * (1.0 - z2 / 6.0 + z2 * z2 / 120.0),
            l * l / 2.0 * (1.0 - z2 / 12.0 + z2 * z2 / 360.0),
        ]
    } else {
        let k = kappa;
        let half = (0.5 * z).sin();
        [(l - z.sin() / k) / (k * k), z.sin() / k, 2.0 * half * half / (k * k)]
    }
}

/// One kernel direction with its closed-form coefficients.
#[derive(Debug, Clone)]
pub struct KernelElement {
    pub field: HeightField,
    /// Right-hand side of `h'' + kappa^2 h = c`.
    pub c: f64,
    /// `A, B` of `c/kappa^2 + A cos + B sin` (flat: `c s^2/2 + A + B s`).
    pub a: f64,
    pub b: f64,
    pub kappa: f64,
    pub h0: f64,
    pub hl: f64,
    /// Exact integral over `(0, l)`.
    pub integral: f64,
    coef: Vector3<f64>,
}

impl KernelElement {
    fn new(grid: &Arc<Grid1D>, coef: Vector3<f64>, kappa: f64) -> Self {
        let l = grid.l();
        let eval = move |s: f64| {
            let (v, _) = basis_at(kappa, s);
            coef[0] * v[0] + coef[1] * v[1] + coef[2] * v[2]
        };
        let ints = basis_integrals(kappa, l);
        let (a, b) = if kappa == 0.0 {
            (coef[1], coef[2])
        } else {
            (coef[1] - coef[0] / (kappa * kappa), coef[2] / kappa)
        };
        Self {
            field: HeightField::from_fn(grid.clone(), eval),
            c: coef[0],
            a,
            b,
            kappa,
            h0: eval(0.0),
            hl: eval(l),
            integral: coef[0] * ints[0] + coef[1] * ints[1] + coef[2] * ints[2],
            coef,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let (v, _) = basis_at(self.kappa, s);
        self.coef.dot(&Vector3::from(v))
    }

    pub fn eval_deriv(&self, s: f64) -> f64 {
        let (_, d) = basis_at(self.kappa, s);
        self.coef.dot(&Vector3::from(d))
    }
}

#[derive(Debug, Clone)]
pub struct KernelDescription {
    pub dimension: usize,
    pub basis: Vec<KernelElement>,
    /// The Robin system lost rank: more than one equilibrium direction.
    pub degenerate: bool,
    /// No nonzero kernel element is mean-free, so the zero eigenvalue is
    /// semisimple.
    pub semisimple: bool,
}

/// Robin rows `h'(0) + omega1 h(0)` and `h'(l) - omega2 h(l)` on the
/// internal basis.
fn robin_matrix(p: &ModelParams) -> Matrix2x3<f64> {
    let (v0, d0) = basis_at(p.kappa, 0.0);
    let (vl, dl) = basis_at(p.kappa, p.l);
    Matrix2x3::from_fn(|r, j| {
        if r == 0 {
            d0[j] + p.omega1 * v0[j]
        } else {
            dl[j] - p.omega2 * vl[j]
        }
    })
}

fn describe(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<KernelDescription> {
    if (grid.l() - p.l).abs() > 1e-12 * p.l {
        return Err(Error::InvalidGrid(format!(
            "grid length {} differs from l = {}",
            grid.l(),
            p.l
        )));
    }
    let null = robin_null_space(&robin_matrix(p));
    let dimension = null.len();
    let basis: Vec<KernelElement> = null
        .into_iter()
        .map(|v| KernelElement::new(grid, normalize(v), p.kappa))
        .collect();
    let semisimple = dimension == 1 && {
        let e = &basis[0];
        e.integral.abs() > 1e-10 * e.field.norm_l2() * grid.l().sqrt()
    };
    Ok(KernelDescription {
        dimension,
        basis,
        degenerate: dimension > 1,
        semisimple,
    })
}

/// Null space of the 2x3 Robin matrix; rank is decided by singular values
/// relative to the largest.
fn robin_null_space(r: &Matrix2x3<f64>) -> Vec<Vector3<f64>> {
    let r0 = Vector3::new(r[(0, 0)], r[(0, 1)], r[(0, 2)]);
    let r1 = Vector3::new(r[(1, 0)], r[(1, 1)], r[(1, 2)]);
    let svd = r.svd(false, true);
    let s = svd.singular_values;
    let smax = s.max();
    let rank = s.iter().filter(|&&v| v > RANK_TOL * smax).count();
    match rank {
        2 => vec![r0.cross(&r1).normalize()],
        1 => {
            let vt = svd.v_t.expect("requested right singular vectors");
            let v1 = Vector3::new(vt[(0, 0)], vt[(0, 1)], vt[(0, 2)]);
            // complement of v1, built from the coordinate axes it is least
            // aligned with
            let mut axes: Vec<Vector3<f64>> = (0..3)
                .map(|i| {
                    let e = Vector3::ith(i, 1.0);
                    e - v1 * v1.dot(&e)
                })
                .collect();
            axes.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
            let first = axes[0].normalize();
            let second = (axes[1] - first * first.dot(&axes[1])).normalize();
            vec![first, second]
        }
        _ => (0..3).map(|i| Vector3::ith(i, 1.0)).collect(),
    }
}

/// Unit `c` when `c` is significant, otherwise unit max-norm.
fn normalize(v: Vector3<f64>) -> Vector3<f64> {
    let amax = v.amax();
    if v[0].abs() > 1e-12 * amax {
        v / v[0]
    } else {
        let i = v.iamax();
        v / v[i]
    }
}

/// Kernel of the flat (`kappa = 0`) problem.
pub fn kernel_flat(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<KernelDescription> {
    let p = validate_params(*p)?;
    if p.kappa != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "flat kernel needs kappa = 0, got {}",
            p.kappa
        )));
    }
    describe(&p, grid)
}

/// Kernel of the curved (`kappa != 0`) problem.
pub fn kernel_curved(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<KernelDescription> {
    let p = validate_params(*p)?;
    if p.kappa == 0.0 {
        return Err(Error::InvalidParameter("curved kernel needs kappa != 0".into()));
    }
    describe(&p, grid)
}

/// Dispatches on `kappa`.
pub fn kernel(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<KernelDescription> {
    if p.kappa == 0.0 {
        kernel_flat(p, grid)
    } else {
        kernel_curved(p, grid)
    }
}

/// `h(0)` of the flat kernel element with `h'' = c`.
pub fn flat_kernel_h0(p: &ModelParams, c: f64) -> Result<f64> {
    Ok(c * (p.l - p.omega2 * p.l * p.l / 2.0) / flat_denominator(p)?)
}

/// `omega1 + omega2 - omega1 omega2 l`, rejected when it vanishes relative
/// to its terms.
fn flat_denominator(p: &ModelParams) -> Result<f64> {
    let (l, w1, w2) = (p.l, p.omega1, p.omega2);
    let den = w1 + w2 - w1 * w2 * l;
    let size = w1.abs() + w2.abs() + (w1 * w2 * l).abs();
    if den == 0.0 || den.abs() <= RANK_TOL * size {
        return Err(Error::DegenerateDenominator { value: den });
    }
    Ok(den)
}

/// Integral of the flat kernel element with `h'' = c1`.
pub fn semisimple_integral(p: &ModelParams, c1: f64) -> Result<f64> {
    let (l, w1, w2) = (p.l, p.omega1, p.omega2);
    let den = flat_denominator(p)?;
    let num = 6.0 * l * l + w1 * w2 * l.powi(4) / 2.0 - 2.0 * (w1 + w2) * l.powi(3);
    Ok(c1 * num / (6.0 * den))
}

/// `N(A) ∩ R(A) = {0}` for a square matrix, decided from its singular
/// vectors: with `X`, `Y` orthonormal bases of the right and left null
/// spaces (singular values below `tol * sigma_max`), the zero eigenvalue is
/// semisimple iff `Y^T X` is nonsingular, which is equivalent to `A` and
/// `A^2` having the same rank.
pub fn check_semisimple(a: &DMatrix<f64>, tol: f64) -> bool {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "check_semisimple needs a square matrix");
    let svd = a.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return false,
    };
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return true;
    }
    let null: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= tol * smax).collect();
    if null.is_empty() {
        return true;
    }
    let k = null.len();
    let x = DMatrix::from_fn(n, k, |r, j| vt[(null[j], r)]);
    let y = DMatrix::from_fn(n, k, |r, j| u[(r, null[j])]);
    let g = y.transpose() * x;
    let smin = g.singular_values().min();
    smin > tol.sqrt()
}

/// Residuals of a kernel element on its grid: `max |h'' + kappa^2 h - c|`
/// with the grid's differentiation matrix, and the two Robin residuals from
/// the closed form.
pub fn element_residuals(e: &KernelElement, p: &ModelParams) -> (f64, f64, f64) {
    let d = e.field.grid.diff();
    let h = &e.field.values;
    let h2 = d * (d * h);
    let ode = (h2 + h * (p.kappa * p.kappa)).add_scalar(-e.c).amax();
    let l = p.l;
    let r0 = e.eval_deriv(0.0) + p.omega1 * e.eval(0.0);
    let rl = e.eval_deriv(l) - p.omega2 * e.eval(l);
    (ode, r0.abs(), rl.abs())
}

/// Gram determinant of the basis fields in the grid's L2 product.
pub fn gram_determinant(k: &KernelDescription) -> f64 {
    let m = k.basis.len();
    let g = DMatrix::from_fn(m, m, |i, j| {
        let a = &k.basis[i].field;
        let b = &k.basis[j].field;
        let mass = a.grid.mass();
        a.values.dot(&(mass * &b.values))
    });
    g.determinant()
}
