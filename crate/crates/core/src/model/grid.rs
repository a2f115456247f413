use super::quadrature::{
    barycentric_matrix, chebyshev_barycentric_weights, chebyshev_diff_matrix, chebyshev_lobatto, clenshaw_curtis,
    gauss_legendre,
};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Polynomial interpolant on Chebyshev–Lobatto nodes.
    Chebyshev,
    /// Continuous piecewise-linear functions (uniform finite-difference
    /// grids, or arbitrary breakpoints).
    PiecewiseLinear,
}

impl FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" | "cheb" => Ok(Basis::Chebyshev),
            "fd" | "p1" | "linear" => Ok(Basis::PiecewiseLinear),
            _ => Err(Error::Config(format!("unknown basis '{s}'"))),
        }
    }
}

/// Resolution recipe; the interval length comes from the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub basis: Basis,
    /// Cosine modes kept in the nonlocal coupling; `None` means `n - 1`.
    pub modes: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 129,
            basis: Basis::Chebyshev,
            modes: None,
        }
    }
}

impl GridSpec {
    pub fn chebyshev(n: usize) -> Self {
        Self {
            n,
            basis: Basis::Chebyshev,
            modes: None,
        }
    }

    pub fn build(&self, l: f64) -> Result<Grid1D> {
        let modes = self.modes.unwrap_or(self.n.saturating_sub(1));
        match self.basis {
            Basis::Chebyshev => Grid1D::chebyshev_with_modes(self.n, l, modes),
            Basis::PiecewiseLinear => {
                let nodes = uniform_nodes(self.n, l);
                Grid1D::piecewise_linear(nodes, modes)
            }
        }
    }
}

/// A discretization of `[0, l]` together with the exact Galerkin matrices of
/// its basis.
///
/// `mass` and `stiffness` are the L2 and H1-seminorm Gram matrices of the
/// nodal basis; `cosine[(k-1, j)]` is the integral of the j-th nodal basis
/// function against the normalized cosine `sqrt(2/l) cos(k pi x / l)`.
#[derive(Debug, Clone)]
pub struct Grid1D {
    l: f64,
    basis: Basis,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    modes: usize,
    diff: DMatrix<f64>,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    cosine: DMatrix<f64>,
    // Chebyshev only: values and derivatives at Gauss points, for
    // sum-of-squares integrals
    gauss: Option<GaussData>,
}

#[derive(Debug, Clone)]
struct GaussData {
    weights: Vec<f64>,
    interp: DMatrix<f64>,
    deriv: DMatrix<f64>,
}

fn uniform_nodes(n: usize, l: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { l } else { l * i as f64 / (n - 1) as f64 })
        .collect()
}

fn check_common(n: usize, l: f64, modes: usize) -> Result<()> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::NonPositiveLength { what: "l", value: l });
    }
    if n < 4 {
        return Err(Error::InvalidGrid(format!("need at least 4 nodes, got {n}")));
    }
    if modes == 0 {
        return Err(Error::InvalidGrid("need at least one cosine mode".into()));
    }
    Ok(())
}

impl Grid1D {
    pub fn chebyshev(n: usize, l: f64) -> Result<Self> {
        Self::chebyshev_with_modes(n, l, n.saturating_sub(1))
    }

    pub fn chebyshev_with_modes(n: usize, l: f64, modes: usize) -> Result<Self> {
        check_common(n, l, modes)?;
        let nodes = chebyshev_lobatto(n, l);
        let weights = clenshaw_curtis(n, l);
        let bary = chebyshev_barycentric_weights(n);
        let diff = chebyshev_diff_matrix(n, l);

        // products of two degree n-1 polynomials are integrated exactly
        let (gx, gw) = gauss_legendre(n + 1, l);
        let interp = barycentric_matrix(&nodes, &bary, &gx);
        let deriv = &interp * &diff;
        let mass = weighted_gram(&interp, &gw);
        let stiffness = weighted_gram(&deriv, &gw);

        // cosine moments of the interpolant; the fine rule resolves both the
        // polynomial and the highest cosine
        let (fx, fw) = gauss_legendre(2 * (n + modes) + 32, l);
        let fine = barycentric_matrix(&nodes, &bary, &fx);
        let mut ew = DMatrix::zeros(modes, fx.len());
        let norm = (2.0 / l).sqrt();
        for k in 0..modes {
            let freq = (k + 1) as f64 * PI / l;
            for (q, (&x, &w)) in fx.iter().zip(&fw).enumerate() {
                ew[(k, q)] = norm * (freq * x).cos() * w;
            }
        }
        let cosine = ew * fine;

        Ok(Self {
            l,
            basis: Basis::Chebyshev,
            nodes,
            weights,
            modes,
            diff,
            mass,
            stiffness,
            cosine,
            gauss: Some(GaussData {
                weights: gw,
                interp,
                deriv,
            }),
        })
    }

    /// Uniform piecewise-linear grid with `n - 1` cosine modes.
    pub fn uniform(n: usize, l: f64) -> Result<Self> {
        check_common(n, l, 1)?;
        Self::piecewise_linear(uniform_nodes(n, l), n - 1)
    }

    /// Piecewise-linear grid on arbitrary increasing breakpoints from `0` to `l`.
    pub fn piecewise_linear(nodes: Vec<f64>, modes: usize) -> Result<Self> {
        let n = nodes.len();
        let l = *nodes.last().unwrap_or(&0.0);
        check_common(n, l, modes)?;
        if nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("nodes must start at 0 and increase strictly".into()));
        }
        let mut mass = DMatrix::zeros(n, n);
        let mut stiffness = DMatrix::zeros(n, n);
        let mut weights = vec![0.0; n];
        let mut cosine = DMatrix::zeros(modes, n);
        let norm = (2.0 / l).sqrt();
        for e in 0..n - 1 {
            let (a, b) = (nodes[e], nodes[e + 1]);
            let h = b - a;
            mass[(e, e)] += h / 3.0;
            mass[(e + 1, e + 1)] += h / 3.0;
            mass[(e, e + 1)] += h / 6.0;
            mass[(e + 1, e)] += h / 6.0;
            stiffness[(e, e)] += 1.0 / h;
            stiffness[(e + 1, e + 1)] += 1.0 / h;
            stiffness[(e, e + 1)] -= 1.0 / h;
            stiffness[(e + 1, e)] -= 1.0 / h;
            weights[e] += h / 2.0;
            weights[e + 1] += h / 2.0;
            for k in 0..modes {
                let w = (k + 1) as f64 * PI / l;
                let (left, right) = hat_cosine_moments(w, a, h);
                cosine[(k, e)] += norm * left;
                cosine[(k, e + 1)] += norm * right;
            }
        }
        let diff = nonuniform_diff(&nodes);
        Ok(Self {
            l,
            basis: Basis::PiecewiseLinear,
            nodes,
            weights,
            modes,
            diff,
            mass,
            stiffness,
            cosine,
            gauss: None,
        })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn basis(&self) -> Basis {
        self.basis
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn modes(&self) -> usize {
        self.modes
    }
    /// First-derivative matrix on nodal values (spectral for Chebyshev,
    /// second-order three-point differences otherwise).
    pub fn diff(&self) -> &DMatrix<f64> {
        &self.diff
    }
    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }
    /// Map from nodal values to normalized cosine coefficients `k = 1..=K`.
    pub fn cosine(&self) -> &DMatrix<f64> {
        &self.cosine
    }

    pub fn integrate(&self, v: &[f64]) -> f64 {
        self.weights.iter().zip(v).map(|(w, v)| w * v).sum()
    }

    pub fn mean(&self, v: &[f64]) -> f64 {
        self.integrate(v) / self.l
    }

    /// Integral of `v^2`, as a sum of squares where possible.
    pub fn l2_sq(&self, v: &[f64]) -> f64 {
        match &self.gauss {
            Some(g) => sum_sq(&g.interp, &g.weights, v),
            None => {
                let x = DVector::from_column_slice(v);
                x.dot(&(&self.mass * &x))
            }
        }
    }

    /// Integral of `v'^2`, as a sum of squares.
    pub fn grad_sq(&self, v: &[f64]) -> f64 {
        match &self.gauss {
            Some(g) => sum_sq(&g.deriv, &g.weights, v),
            None => self
                .nodes
                .windows(2)
                .zip(v.windows(2))
                .map(|(x, y)| (y[1] - y[0]).powi(2) / (x[1] - x[0]))
                .sum(),
        }
    }

    pub fn cosine_coefficients(&self, v: &[f64]) -> DVector<f64> {
        &self.cosine * DVector::from_column_slice(v)
    }

    /// Matrix evaluating the grid's interpolant at `targets`.
    pub fn interpolation_matrix(&self, targets: &[f64]) -> DMatrix<f64> {
        match self.basis {
            Basis::Chebyshev => barycentric_matrix(&self.nodes, &chebyshev_barycentric_weights(self.n()), targets),
            Basis::PiecewiseLinear => {
                let n = self.n();
                let mut m = DMatrix::zeros(targets.len(), n);
                for (r, &x) in targets.iter().enumerate() {
                    let e = self.nodes.partition_point(|&xn| xn <= x).clamp(1, n - 1) - 1;
                    let t = (x - self.nodes[e]) / (self.nodes[e + 1] - self.nodes[e]);
                    m[(r, e)] = 1.0 - t;
                    m[(r, e + 1)] = t;
                }
                m
            }
        }
    }
}

fn weighted_gram(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut aw = a.clone();
    for (i, &wi) in w.iter().enumerate() {
        aw.row_mut(i).scale_mut(wi);
    }
    let g = a.transpose() * aw;
    (&g + g.transpose()) * 0.5
}

fn sum_sq(a: &DMatrix<f64>, w: &[f64], v: &[f64]) -> f64 {
    let y = a * DVector::from_column_slice(v);
    y.iter().zip(w).map(|(y, w)| w * y * y).sum()
}

/// Integrals over `[a, a+h]` of the two hat functions times `cos(w x)`.
fn hat_cosine_moments(w: f64, a: f64, h: f64) -> (f64, f64) {
    let z = w * h;
    // integrals over [0, h] of cos(wt), sin(wt), t cos(wt), t sin(wt)
    let (c0, s0, c1, s1) = if z.abs() < 1e-2 {
        let z2 = z * z;
        (
            h * (1.0 - z2 / 6.0 + z2 * z2 / 120.0),
            h * z * (0.5 - z2 / 24.0 + z2 * z2 / 720.0),
            h * h * (0.5 - z2 / 8.0 + z2 * z2 / 144.0),
            h * h * z * (1.0 / 3.0 - z2 / 30.0 + z2 * z2 / 840.0),
        )
    } else {
        let half = (0.5 * z).sin();
        (
            z.sin() / w,
            2.0 * half * half / w,
            h * z.sin() / w - 2.0 * half * half / (w * w),
            (z.sin() - z * z.cos()) / (w * w),
        )
    };
    let (ca, sa) = ((w * a).cos(), (w * a).sin());
    let right = (ca * c1 - sa * s1) / h;
    let left = ca * c0 - sa * s0 - right;
    (left, right)
}

/// Three-point Lagrange differentiation on arbitrary nodes.
fn nonuniform_diff(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let c = i.clamp(1, n - 2);
        let idx = [c - 1, c, c + 1];
        for (a, &ja) in idx.iter().enumerate() {
            // derivative of the a-th Lagrange polynomial at x[i]
            let mut s = 0.0;
            for (b, &jb) in idx.iter().enumerate() {
                if b == a {
                    continue;
                }
                let mut term = 1.0 / (x[ja] - x[jb]);
                for (c2, &jc) in idx.iter().enumerate() {
                    if c2 != a && c2 != b {
                        term *= (x[i] - x[jc]) / (x[ja] - x[jc]);
                    }
                }
                s += term;
            }
            d[(i, ja)] = s;
        }
    }
    d
}
