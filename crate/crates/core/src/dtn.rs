//! The two-phase Dirichlet-to-Neumann operator on the strip
//! `(0, l) x (-H, H)` and its inverse on mean-free data.
//!
//! With Neumann walls the harmonic extension of `cos(k pi x / l)` is
//! `cos(k pi x / l) cosh(k pi (H - |y|) / l) / cosh(k pi H / l)`, so the
//! negative flux jump across `y = 0` acts diagonally with multiplier
//! `d_k = 2 (k pi / l) tanh(k pi H / l)`.

use crate::error::{Error, Result};
use crate::model::{validate_params, Grid1D, HeightField, ModelParams};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::sync::Arc;

/// Mode multipliers `d_k`, `k = 1..=K`, stored at index `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DtnSymbol {
    pub params: ModelParams,
    pub d: Vec<f64>,
}

impl DtnSymbol {
    pub fn modes(&self) -> usize {
        self.d.len()
    }

    /// `d_k`, with `d_0 = 0` for the constants.
    pub fn value(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.d[k - 1]
        }
    }
}

pub fn dtn_symbol(p: &ModelParams, modes: usize) -> Result<DtnSymbol> {
    let p = validate_params(*p)?;
    let d = (1..=modes)
        .map(|k| {
            let q = k as f64 * PI / p.l;
            2.0 * q * (q * p.h).tanh()
        })
        .collect();
    Ok(DtnSymbol { params: p, d })
}

fn check_grid(grid: &Grid1D, sym: &DtnSymbol) -> Result<()> {
    if (grid.l() - sym.params.l).abs() > 1e-12 * sym.params.l {
        return Err(Error::InvalidGrid(format!(
            "grid length {} differs from l = {}",
            grid.l(),
            sym.params.l
        )));
    }
    Ok(())
}

/// Samples of `sqrt(2/l) cos(k pi x / l)` at the grid nodes, one column per mode.
fn cosine_samples(grid: &Grid1D, modes: usize) -> DMatrix<f64> {
    let l = grid.l();
    let norm = (2.0 / l).sqrt();
    DMatrix::from_fn(grid.n(), modes, |i, k| {
        norm * ((k + 1) as f64 * PI * grid.nodes()[i] / l).cos()
    })
}

fn diagonal_action(g: &HeightField, sym: &DtnSymbol, f: impl Fn(f64) -> f64) -> Result<HeightField> {
    let grid = &g.grid;
    check_grid(grid, sym)?;
    let modes = grid.modes().min(sym.modes());
    let c = grid.cosine_coefficients(g.values.as_slice());
    let scaled = DVector::from_fn(modes, |k, _| c[k] * f(sym.d[k]));
    let values = cosine_samples(grid, modes) * scaled;
    Ok(HeightField {
        grid: grid.clone(),
        values,
    })
}

/// `N g = sum_k (g_k / d_k) e_k` for mean-free `g`.
pub fn apply_ntd(g: &HeightField, sym: &DtnSymbol) -> Result<HeightField> {
    let mean = g.mean();
    let tol = 1e-10 * g.norm_l2() / g.grid.l().sqrt();
    if mean.abs() > tol {
        return Err(Error::NotMeanFree { mean: mean.abs(), tol });
    }
    diagonal_action(g, sym, |d| 1.0 / d)
}

/// `D h = sum_k d_k h_k e_k`; constants are annihilated.
pub fn apply_dtn(h: &HeightField, sym: &DtnSymbol) -> Result<HeightField> {
    diagonal_action(h, sym, |d| d)
}

/// Discrete forms of `N` on a grid.
#[derive(Debug, Clone)]
pub struct NtdMatrices {
    /// Symmetric positive semidefinite Gram matrix `C^T diag(1/d) C` of the
    /// bilinear form `<N u, v>` on nodal coefficients; its kernel is the
    /// constants.
    pub form: DMatrix<f64>,
    /// Nodal operator: samples of `N g` from samples of `g`.
    pub operator: DMatrix<f64>,
}

pub fn assemble_ntd_matrix(grid: &Grid1D, sym: &DtnSymbol) -> Result<NtdMatrices> {
    check_grid(grid, sym)?;
    let modes = grid.modes().min(sym.modes());
    let c = grid.cosine().rows(0, modes).into_owned();
    let mut scaled = c.clone();
    for k in 0..modes {
        scaled.row_mut(k).scale_mut(1.0 / sym.d[k]);
    }
    let form = c.transpose() * &scaled;
    let form = (&form + form.transpose()) * 0.5;
    let operator = cosine_samples(grid, modes) * scaled;
    Ok(NtdMatrices { form, operator })
}

/// Finite-difference reference for the Dirichlet-to-Neumann map.
///
/// Five-point Laplacian on `(0,l) x (0,H)` with `mesh = (nx, ny)` intervals,
/// Dirichlet data `g` on `y = 0` and reflecting Neumann walls elsewhere; the
/// lower half is the mirror image. The discrete x-operator is diagonalized by
/// discrete cosines, which leaves one tridiagonal solve in `y` per mode.
/// Returns `-[d mu / dy]` at the `nx + 1` uniform nodes, with the one-sided
/// second-order flux formula.
pub fn fd_dtn_oracle(g: &HeightField, p: &ModelParams, mesh: (usize, usize)) -> Result<HeightField> {
    let p = validate_params(*p)?;
    let (nx, ny) = mesh;
    if nx < 32 || ny < 32 {
        return Err(Error::InvalidGrid(format!("oracle mesh {nx}x{ny} below 32x32")));
    }
    let out_grid = Arc::new(Grid1D::uniform(nx + 1, p.l)?);
    let xs = out_grid.nodes().to_vec();
    let gv = g.grid.interpolation_matrix(&xs) * &g.values;
    let dx = p.l / nx as f64;
    let dy = p.h / ny as f64;

    // discrete cosine transform, orthogonal for trapezoid weights
    let cos_table = DMatrix::from_fn(nx + 1, nx + 1, |k, i| (PI * (k * i) as f64 / nx as f64).cos());
    let tw = |i: usize| if i == 0 || i == nx { 0.5 } else { 1.0 };
    let ghat: Vec<f64> = (0..=nx)
        .map(|k| {
            let s: f64 = (0..=nx).map(|i| tw(i) * gv[i] * cos_table[(k, i)]).sum();
            s / (nx as f64 * if k == 0 || k == nx { 1.0 } else { 0.5 })
        })
        .collect();

    // modal solutions u_k(y_j), j = 0..=ny
    let mut modal = DMatrix::zeros(nx + 1, ny + 1);
    for (k, &gk) in ghat.iter().enumerate().take(nx + 1) {
        let s = (PI * k as f64 / (2.0 * nx as f64)).sin();
        let sigma = 4.0 * s * s / (dx * dx);
        let u = solve_mode(gk, sigma, dy, ny);
        modal.row_mut(k).copy_from_slice(&u);
    }
    let mu = cos_table.transpose() * &modal;

    let scale = gv.amax().max(1e-300);
    let res = five_point_residual(&mu, dx, dy) / scale;
    if !(res <= 1e-10) {
        return Err(Error::SolverFailure(format!(
            "five-point residual {res:e} exceeds 1e-10"
        )));
    }

    // mirror symmetry doubles the one-sided flux
    let values = DVector::from_fn(nx + 1, |i, _| {
        let dmu = (-3.0 * mu[(i, 0)] + 4.0 * mu[(i, 1)] - mu[(i, 2)]) / (2.0 * dy);
        -2.0 * dmu
    });
    Ok(HeightField { grid: out_grid, values })
}

/// `u'' - sigma u = 0` on `j = 1..=ny`, `u_0 = g`, reflecting at `j = ny`.
fn solve_mode(g: f64, sigma: f64, dy: f64, ny: usize) -> Vec<f64> {
    let m = ny;
    let diag = -2.0 - sigma * dy * dy;
    let mut lower = vec![1.0; m];
    let mut upper = vec![1.0; m];
    let d = vec![diag; m];
    let mut rhs = vec![0.0; m];
    rhs[0] = -g;
    lower[m - 1] = 2.0;
    upper[m - 1] = 0.0;
    let x = thomas(&lower, &d, &upper, &rhs);
    let mut u = Vec::with_capacity(ny + 1);
    u.push(g);
    u.extend(x);
    u
}

/// Tridiagonal solve; `lower[0]` and `upper[m-1]` are ignored.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < m { upper[i] / den } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Max-norm of the five-point residual with reflected ghost values, scaled
/// by `dx^2`.
fn five_point_residual(mu: &DMatrix<f64>, dx: f64, dy: f64) -> f64 {
    let (nxp, nyp) = mu.shape();
    let mut worst: f64 = 0.0;
    let r2 = (dx / dy).powi(2);
    for i in 0..nxp {
        let im = if i == 0 { 1 } else { i - 1 };
        let ip = if i + 1 == nxp { nxp - 2 } else { i + 1 };
        for j in 1..nyp {
            let jp = if j + 1 == nyp { nyp - 2 } else { j + 1 };
            let lap =
                mu[(im, j)] + mu[(ip, j)] - 2.0 * mu[(i, j)] + r2 * (mu[(i, j - 1)] + mu[(i, jp)] - 2.0 * mu[(i, j)]);
            worst = worst.max(lap.abs());
        }
    }
    worst
}

/// One mode of the finite-difference check of the symbol.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OracleRow {
    pub k: usize,
    pub symbol: f64,
    pub fd: f64,
    pub rel_err: f64,
}

/// Applies [`fd_dtn_oracle`] to `cos(k pi x / l)` for `k = 1..=modes` and
/// reads the multiplier off by projection onto the same cosine.
pub fn oracle_table(p: &ModelParams, mesh: (usize, usize), modes: usize) -> Result<Vec<OracleRow>> {
    let sym = dtn_symbol(p, modes)?;
    let grid = Arc::new(Grid1D::uniform(mesh.0 + 1, p.l)?);
    (1..=modes)
        .map(|k| {
            let q = k as f64 * PI / p.l;
            let g = HeightField::from_fn(grid.clone(), |x| (q * x).cos());
            let out = fd_dtn_oracle(&g, p, mesh)?;
            let num = grid.integrate(out.values.component_mul(&g.values).as_slice());
            let den = grid.integrate(g.values.component_mul(&g.values).as_slice());
            let fd = num / den;
            let symbol = sym.value(k);
            Ok(OracleRow {
                k,
                symbol,
                fd,
                rel_err: (fd - symbol).abs() / symbol,
            })
        })
        .collect()
}
