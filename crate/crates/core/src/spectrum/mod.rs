//! Spectrum of the linearized operator, stability classification, threshold
//! search and parameter sweeps.
//!
//! Nonzero eigenvalues solve `lambda N h = (I - P0)(h'' + kappa^2 h)` on
//! fields satisfying both Robin conditions with zero mean; they are the
//! eigenvalues of `-A` outside its zero group.

mod assembly;
mod classify;
mod solve;
mod sweep;

pub(crate) use assembly::null_space_basis;
pub use assembly::{assemble_operator, Assembly};
pub use classify::{classify, classify_with, find_threshold, StabilityVerdict, Vary, Verdict};
pub(crate) use solve::lambda_scale;
pub use solve::{rayleigh, reduced_residual, solve_spectrum, Spectrum};
#[cfg(feature = "parallel")]
pub use sweep::sweep_parallel;
pub use sweep::{
    read_sweep_csv, sweep, sweep_sequential, write_sweep_csv, SweepRecord, SweepRow, SweepTable, SWEEP_HEADER,
};

use crate::error::{Error, Result};
use crate::model::{Grid1D, HeightField, ModelParams};
use nalgebra::{Complex, DMatrix, DVector};
use std::sync::Arc;

/// A real eigenvalue of `-A` with its mean-free eigenfunction.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    /// Rayleigh quotient of the computed eigenvector.
    pub lambda: f64,
    /// Unit L2 norm, mean-free.
    pub h: HeightField,
    /// Relative residual of the reduced generalized problem.
    pub residual: f64,
    /// `|lambda I*(h) + E| / max(|lambda I*(h)|, E)` where `E` is the bulk
    /// dissipation of the potential with trace `(I - P0)(h'' + kappa^2 h)`.
    pub energy_defect: f64,
}

/// `(lambda I*(h), E)` for the energy identity `lambda I*(h) + E = 0`.
///
/// `E = sum_k d_k g_k^2` is computed from the strong form
/// `g = (I - P0)(h'' + kappa^2 h)` with the grid's differentiation matrix,
/// independently of the weak form used by the solver.
pub fn energy_terms(asm: &Assembly, h: &[f64], lambda: f64) -> (f64, f64) {
    let d = asm.grid.diff();
    let v = DVector::from_column_slice(h);
    let g = d * (d * &v) + &v * asm.params.kappa.powi(2);
    let gh = asm.grid.cosine_coefficients(g.as_slice());
    let bulk: f64 = gh.iter().zip(&asm.symbol.d).map(|(c, d)| d * c * c).sum();
    (lambda * asm.i_star(h), bulk)
}

fn eigenpair(asm: &Assembly, spec: &Spectrum, j: usize, nr: &DMatrix<f64>, sr: &DMatrix<f64>) -> Result<Eigenpair> {
    let col = spec.vectors.column(j);
    let h: Vec<f64> = col.iter().copied().collect();
    let lambda = rayleigh(asm, &h);
    let y = spec.coords.column(j).into_owned();
    let residual = reduced_residual(nr, sr, &y, lambda);
    let (a, e) = energy_terms(asm, &h, lambda);
    let energy_defect = (a + e).abs() / a.abs().max(e).max(f64::MIN_POSITIVE);
    // unit L2 norm, first nonnegligible node value positive
    let mut v = DVector::from_vec(h);
    let norm = asm.grid.l2_sq(v.as_slice()).sqrt();
    let pivot = v.iter().copied().find(|x| x.abs() > 1e-8 * v.amax()).unwrap_or(1.0);
    v *= pivot.signum() / norm;
    Ok(Eigenpair {
        lambda,
        h: HeightField::new(asm.grid.clone(), v)?,
        residual,
        energy_defect,
    })
}

/// The `count` largest eigenpairs, sorted descending.
pub fn leading_eigenvalues(p: &ModelParams, grid: &Arc<Grid1D>, count: usize) -> Result<Vec<Eigenpair>> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let asm = assemble_operator(p, grid)?;
    let spec = solve_spectrum(&asm)?;
    if spec.lambdas.len() < count {
        return Err(Error::EigensolverFailure(format!(
            "only {} resolved eigenvalues, {count} requested",
            spec.lambdas.len()
        )));
    }
    let (nr, sr) = asm.reduced();
    let mut pairs = (0..count)
        .map(|j| eigenpair(&asm, &spec, j, &nr, &sr))
        .collect::<Result<Vec<_>>>()?;
    pairs.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    Ok(pairs)
}

/// Largest `|Im lambda| / max(1, |Re lambda|)` over the resolved eigenvalues
/// of the nonsymmetric matrix `(sigma N - S)^{-1} N` (no symmetry used), with
/// `lambda = sigma - 1/nu`.
pub fn realness_defect(asm: &Assembly, spec: &Spectrum) -> Result<f64> {
    let (nr, sr) = asm.reduced();
    let t = &nr * spec.shift - &sr;
    let x = t
        .lu()
        .solve(&nr)
        .ok_or_else(|| Error::EigensolverFailure("shifted matrix is singular".into()))?;
    let nus: Vec<Complex<f64>> = x.complex_eigenvalues().iter().copied().collect();
    let nu_max = nus.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for nu in nus {
        if nu.norm() <= solve::RESOLVED_FRACTION * nu_max {
            continue;
        }
        let lambda = Complex::new(spec.shift, 0.0) - nu.inv();
        worst = worst.max(lambda.im.abs() / lambda.re.abs().max(1.0));
    }
    Ok(worst)
}

/// Largest `|mean(h)| / |h|` over all resolved eigenvectors.
pub fn mean_defect(asm: &Assembly, spec: &Spectrum) -> f64 {
    spec.vectors
        .column_iter()
        .map(|c| {
            let v = c.as_slice();
            asm.grid.mean(v).abs() / (asm.grid.l2_sq(v) / asm.grid.l()).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Matrix of `-A` on the Robin-admissible fields, in the basis formed by the
/// constrained (mean-free) basis and one extra admissible field with
/// nonzero mean. Intended for coarse grids: it inverts the reduced `N`.
pub fn full_operator_matrix(asm: &Assembly) -> Result<DMatrix<f64>> {
    let q_robin = null_space_basis(&asm.bc)?;
    let ones = DVector::from_element(asm.grid.n(), 1.0);
    let k0 = &q_robin * (q_robin.transpose() * ones);
    let (nr, sr) = asm.reduced();
    let m = nr.nrows();
    let coupling = asm.basis.transpose() * (&asm.s_form * &k0);
    let lu = nr.lu();
    let top_left = lu
        .solve(&sr)
        .ok_or_else(|| Error::EigensolverFailure("reduced N is singular".into()))?;
    let top_right = lu
        .solve(&coupling)
        .ok_or_else(|| Error::EigensolverFailure("reduced N is singular".into()))?;
    let mut a = DMatrix::zeros(m + 1, m + 1);
    a.view_mut((0, 0), (m, m)).copy_from(&top_left);
    a.view_mut((0, m), (m, 1)).copy_from(&top_right);
    Ok(a)
}
