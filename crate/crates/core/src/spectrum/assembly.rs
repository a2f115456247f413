use crate::dtn::{assemble_ntd_matrix, dtn_symbol, DtnSymbol};
use crate::error::{Error, Result};
use crate::model::{validate_params, Grid1D, ModelParams};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Discrete pieces of the generalized problem `lambda N h = (I - P0) S h`.
///
/// `n_form` and `s_form` are Galerkin matrices on nodal coefficients:
/// `h^T n_form h = <N h, h>` and `h^T s_form h = -I*(h)`, the latter being
/// the weak form of `(I - P0)(h'' + kappa^2 h)` for fields satisfying the
/// Robin conditions. `basis` spans the fields satisfying both Robin rows and
/// the mean constraint, with orthonormal columns.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub params: ModelParams,
    pub grid: Arc<Grid1D>,
    pub symbol: DtnSymbol,
    pub n_form: DMatrix<f64>,
    pub s_form: DMatrix<f64>,
    /// `h'(0) + omega1 h(0)` and `h'(l) - omega2 h(l)`.
    pub bc: DMatrix<f64>,
    /// Nodal weights of the mean.
    pub mean_row: DVector<f64>,
    pub basis: DMatrix<f64>,
}

pub fn assemble_operator(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<Assembly> {
    let p = validate_params(*p)?;
    let n = grid.n();
    if (grid.l() - p.l).abs() > 1e-12 * p.l {
        return Err(Error::InvalidGrid(format!(
            "grid length {} differs from l = {}",
            grid.l(),
            p.l
        )));
    }
    let symbol = dtn_symbol(&p, grid.modes())?;
    let n_form = assemble_ntd_matrix(grid, &symbol)?.form;

    let mut s_form = grid.mass() * (p.kappa * p.kappa) - grid.stiffness();
    s_form[(0, 0)] += p.omega1;
    s_form[(n - 1, n - 1)] += p.omega2;

    let d = grid.diff();
    let mut bc = DMatrix::zeros(2, n);
    bc.row_mut(0).copy_from(&d.row(0));
    bc[(0, 0)] += p.omega1;
    bc.row_mut(1).copy_from(&d.row(n - 1));
    bc[(1, n - 1)] -= p.omega2;
    let mean_row = DVector::from_iterator(n, grid.weights().iter().map(|w| w / p.l));

    let mut rows = DMatrix::zeros(3, n);
    rows.rows_mut(0, 2).copy_from(&bc);
    rows.row_mut(2).copy_from(&mean_row.transpose());
    let basis = null_space_basis(&rows)?;

    Ok(Assembly {
        params: p,
        grid: grid.clone(),
        symbol,
        n_form,
        s_form,
        bc,
        mean_row,
        basis,
    })
}

/// Orthonormal basis of `{x : rows x = 0}` from a full QR of `rows^T`.
pub(crate) fn null_space_basis(rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = rows.shape();
    let mut scaled = rows.clone();
    for mut r in scaled.row_iter_mut() {
        let norm = r.norm();
        if norm > 0.0 {
            r /= norm;
        }
    }
    let qr = scaled.transpose().qr();
    let rdiag = qr.r().diagonal();
    if rdiag.iter().any(|v| v.abs() < 1e-12) {
        return Err(Error::SolverFailure("constraint rows are linearly dependent".into()));
    }
    let mut qt = DMatrix::identity(n, n);
    qr.q_tr_mul(&mut qt);
    Ok(qt.rows(m, n - m).transpose())
}

impl Assembly {
    /// `(Q^T N Q, Q^T S Q)`, symmetrized.
    pub fn reduced(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let q = &self.basis;
        let qt = q.transpose();
        let nr = &qt * &self.n_form * q;
        let sr = &qt * &self.s_form * q;
        ((&nr + nr.transpose()) * 0.5, (&sr + sr.transpose()) * 0.5)
    }

    /// `<N h, h>` as a sum of squares of cosine coefficients.
    pub fn n_value(&self, h: &[f64]) -> f64 {
        let c = self.grid.cosine_coefficients(h);
        c.iter().zip(&self.symbol.d).map(|(c, d)| c * c / d).sum()
    }

    /// `I*(h)` from sums of squares and endpoint values.
    pub fn i_star(&self, h: &[f64]) -> f64 {
        let p = &self.params;
        let n = h.len();
        self.grid.grad_sq(h)
            - p.omega1 * h[0] * h[0]
            - p.omega2 * h[n - 1] * h[n - 1]
            - p.kappa * p.kappa * self.grid.l2_sq(h)
    }
}
