use super::assembly::Assembly;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Directions with `nu` below this fraction of the largest are unresolved
/// by the truncated cosine coupling (their `N`-norm is lost to truncation);
/// they are dropped from the spectrum.
pub(crate) const RESOLVED_FRACTION: f64 = 1e-10;

/// Resolved discrete spectrum on the constrained subspace.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues sorted descending.
    pub lambdas: Vec<f64>,
    /// Nodal eigenvectors, one column per eigenvalue, `N`-normalized.
    pub vectors: DMatrix<f64>,
    /// Reduced coordinates of the same eigenvectors.
    pub coords: DMatrix<f64>,
    /// Shift used for the factorization.
    pub shift: f64,
    /// Dimension of the constrained subspace (resolved plus dropped).
    pub dim: usize,
}

/// Natural eigenvalue scale `d_1 (pi/l)^2`.
pub(crate) fn lambda_scale(asm: &Assembly) -> f64 {
    let q = std::f64::consts::PI / asm.params.l;
    asm.symbol.value(1) * q * q
}

/// Cholesky factor of `sigma N - S` for the smallest tried `sigma` (a
/// geometric sequence) that makes it positive definite, i.e. exceeds every
/// eigenvalue.
fn shifted_factor(nr: &DMatrix<f64>, sr: &DMatrix<f64>, scale: f64) -> Result<(f64, DMatrix<f64>)> {
    let mut sigma = scale;
    for _ in 0..80 {
        let t = nr * sigma - sr;
        if let Some(ch) = t.cholesky() {
            return Ok((sigma, ch.l()));
        }
        sigma *= 4.0;
    }
    Err(Error::EigensolverFailure(
        "no shift makes sigma N - S positive definite".into(),
    ))
}

/// Solves `S y = lambda N y` via `N y = nu (sigma N - S) y`,
/// `lambda = sigma - 1/nu`.
pub fn solve_spectrum(asm: &Assembly) -> Result<Spectrum> {
    let (nr, sr) = asm.reduced();
    let m = nr.nrows();
    let scale = lambda_scale(asm);
    let (mut sigma, mut l) = shifted_factor(&nr, &sr, scale)?;
    let mut attempt = 0;
    loop {
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(m, m))
            .ok_or_else(|| Error::EigensolverFailure("singular Cholesky factor".into()))?;
        let b = &linv * &nr * linv.transpose();
        let b = (&b + b.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(b, f64::EPSILON, 0)
            .ok_or_else(|| Error::EigensolverFailure("symmetric eigensolver did not converge".into()))?;
        let nu_max = eig.eigenvalues.max();
        if !(nu_max > 0.0) {
            return Err(Error::EigensolverFailure(
                "N vanishes on the constrained subspace".into(),
            ));
        }
        // a shift barely above the top eigenvalue is accurate but leaves
        // little margin against roundoff; move it once to one scale above
        let lambda_top = sigma - 1.0 / nu_max;
        if attempt == 0 && (sigma - lambda_top) < 0.25 * scale {
            attempt += 1;
            sigma = lambda_top + scale;
            let t = &nr * sigma - &sr;
            l = t
                .cholesky()
                .ok_or_else(|| Error::EigensolverFailure("shifted factorization failed".into()))?
                .l();
            continue;
        }
        let mut order: Vec<usize> = (0..m)
            .filter(|&i| eig.eigenvalues[i] > RESOLVED_FRACTION * nu_max)
            .collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let lt_inv = linv.transpose();
        let k = order.len();
        let mut coords = DMatrix::zeros(m, k);
        let mut lambdas = Vec::with_capacity(k);
        for (j, &i) in order.iter().enumerate() {
            let nu = eig.eigenvalues[i];
            lambdas.push(sigma - 1.0 / nu);
            // T-orthonormal z gives N-norm nu; rescale to unit N-norm
            let y = &lt_inv * eig.eigenvectors.column(i) / nu.sqrt();
            coords.set_column(j, &y);
        }
        let vectors = &asm.basis * &coords;
        return Ok(Spectrum {
            lambdas,
            vectors,
            coords,
            shift: sigma,
            dim: m,
        });
    }
}

/// Rayleigh quotient `-I*(h) / <N h, h>` from sums of squares.
pub fn rayleigh(asm: &Assembly, h: &[f64]) -> f64 {
    -asm.i_star(h) / asm.n_value(h)
}

/// Relative residual `|S y - lambda N y| / (|S y| + |lambda| |N y|)` in
/// reduced coordinates.
pub fn reduced_residual(nr: &DMatrix<f64>, sr: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> f64 {
    let sy = sr * y;
    let ny = nr * y;
    let r = &sy - &ny * lambda;
    r.norm() / (sy.norm() + lambda.abs() * ny.norm()).max(f64::MIN_POSITIVE)
}
