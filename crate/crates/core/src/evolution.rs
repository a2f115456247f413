//! Linearized flow `dh/dt + A h = 0` by exact modal propagation.

use crate::error::{Error, Result};
use crate::kernel::kernel;
use crate::model::{Grid1D, HeightField, ModelParams};
use crate::output::{csv_error, csv_writer, float};
use crate::spectrum::{assemble_operator, lambda_scale, rayleigh, solve_spectrum, Assembly};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

/// Eigendecomposition of `-A` on one grid, reusable across initial data.
#[derive(Debug, Clone)]
pub struct ModalPropagator {
    asm: Assembly,
    nr: DMatrix<f64>,
    lambdas: DVector<f64>,
    /// Reduced eigenvectors, `Nr`-orthonormal columns.
    coords: DMatrix<f64>,
    /// Kernel element with nonzero mean carrying the mean of the data.
    mean_carrier: Option<DVector<f64>>,
    /// Modes with `|lambda|` this small belong to the zero group.
    zero_tol: f64,
}

/// Split of a field into its equilibrium part and modal amplitudes.
#[derive(Debug, Clone)]
struct Decomposition {
    fixed: DVector<f64>,
    amplitudes: DVector<f64>,
}

impl ModalPropagator {
    pub fn new(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<Self> {
        let asm = assemble_operator(p, grid)?;
        let spec = solve_spectrum(&asm)?;
        let lambdas = DVector::from_iterator(
            spec.lambdas.len(),
            (0..spec.lambdas.len()).map(|j| rayleigh(&asm, spec.vectors.column(j).as_slice())),
        );
        let k = kernel(p, grid)?;
        let mean_carrier = k
            .basis
            .iter()
            .max_by(|a, b| {
                let ra = a.integral.abs() / a.field.norm_l2();
                let rb = b.integral.abs() / b.field.norm_l2();
                ra.total_cmp(&rb)
            })
            .filter(|e| e.integral.abs() > 1e-10 * e.field.norm_l2() * grid.l().sqrt())
            .map(|e| e.field.values.clone());
        let scale = lambda_scale(&asm);
        let (nr, _) = asm.reduced();
        Ok(Self {
            nr,
            lambdas,
            coords: spec.coords,
            mean_carrier,
            zero_tol: 1e-8 * scale,
            asm,
        })
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.asm.grid
    }

    /// Resolved eigenvalues, descending.
    pub fn lambdas(&self) -> &DVector<f64> {
        &self.lambdas
    }

    fn decompose(&self, h0: &HeightField) -> Result<Decomposition> {
        let grid = &self.asm.grid;
        if h0.grid.n() != grid.n() || (h0.grid.l() - grid.l()).abs() > 1e-12 * grid.l() {
            return Err(Error::InvalidGrid("initial data lives on a different grid".into()));
        }
        let v = &h0.values;
        let m0 = grid.mean(v.as_slice());
        let (fixed, r) = match &self.mean_carrier {
            Some(k) => {
                let alpha = m0 / grid.mean(k.as_slice());
                (k * alpha, v - k * alpha)
            }
            None => {
                let tol = 1e-10 * (grid.l2_sq(v.as_slice()) / grid.l()).sqrt();
                if m0.abs() > tol {
                    return Err(Error::NotSemisimple);
                }
                (DVector::zeros(grid.n()), v.clone())
            }
        };
        // L2-orthogonal (nodal) projection onto the constrained subspace
        let y = self.asm.basis.transpose() * r;
        let mut amplitudes = self.coords.transpose() * (&self.nr * y);
        let mut fixed = fixed;
        for (i, lam) in self.lambdas.iter().enumerate() {
            if lam.abs() <= self.zero_tol {
                fixed += &self.asm.basis * self.coords.column(i) * amplitudes[i];
                amplitudes[i] = 0.0;
            }
        }
        Ok(Decomposition { fixed, amplitudes })
    }

    fn state(&self, d: &Decomposition, t: f64) -> DVector<f64> {
        let a = d.amplitudes.zip_map(&self.lambdas, |a, l| a * (l * t).exp());
        &d.fixed + &self.asm.basis * (&self.coords * a)
    }

    /// `h(t)` from `h0`.
    pub fn propagate(&self, h0: &HeightField, t: f64) -> Result<HeightField> {
        let d = self.decompose(h0)?;
        HeightField::new(self.asm.grid.clone(), self.state(&d, t))
    }

    /// The limit `h_inf`: the projection of `h0` onto the zero group.
    pub fn equilibrium_part(&self, h0: &HeightField) -> Result<HeightField> {
        let d = self.decompose(h0)?;
        HeightField::new(self.asm.grid.clone(), d.fixed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    /// `|h(t) - h_inf|` in L2.
    pub norm_dev: f64,
    pub mean: f64,
    #[serde(rename = "I_star")]
    pub i_star: f64,
    /// `<N dh/dt, dh/dt>`, the bulk dissipation rate.
    pub dissipation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub times: Vec<f64>,
    pub states: Vec<HeightField>,
    pub h_inf: HeightField,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Samples `h(t)` at `n_steps + 1` uniform times in `[0, t_end]`. Initial
/// data is projected onto fields satisfying the Robin conditions.
pub fn evolve_linear(h0: &HeightField, p: &ModelParams, t_end: f64, n_steps: usize) -> Result<Trajectory> {
    let prop = ModalPropagator::new(p, &h0.grid)?;
    evolve_with(&prop, h0, t_end, n_steps)
}

pub fn evolve_with(prop: &ModalPropagator, h0: &HeightField, t_end: f64, n_steps: usize) -> Result<Trajectory> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end = {t_end} must be positive")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    let d = prop.decompose(h0)?;
    let grid = prop.grid().clone();
    let asm = &prop.asm;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut diagnostics = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let t = t_end * i as f64 / n_steps as f64;
        let v = prop.state(&d, t);
        let dev = &v - &d.fixed;
        let rate: f64 = d
            .amplitudes
            .iter()
            .zip(prop.lambdas.iter())
            .map(|(a, l)| (l * a * (l * t).exp()).powi(2))
            .sum();
        diagnostics.push(StepDiagnostics {
            t,
            norm_dev: grid.l2_sq(dev.as_slice()).sqrt(),
            mean: grid.mean(v.as_slice()),
            i_star: asm.i_star(v.as_slice()),
            dissipation: rate,
        });
        times.push(t);
        states.push(HeightField::new(grid.clone(), v)?);
    }
    Ok(Trajectory {
        params: asm.params,
        times,
        states,
        h_inf: HeightField::new(grid, d.fixed)?,
        diagnostics,
    })
}

/// Least-squares slope of `log |h(t) - h_inf|` over the last half of the
/// samples.
pub fn fit_decay_rate(traj: &Trajectory) -> Result<f64> {
    let n = traj.diagnostics.len();
    if n < 10 {
        return Err(Error::DegenerateTrajectory(format!("{n} samples, need at least 10")));
    }
    let tail = &traj.diagnostics[n / 2..];
    if let Some(s) = tail.iter().find(|s| !(s.norm_dev > 1e-14)) {
        return Err(Error::DegenerateTrajectory(format!(
            "deviation {:e} at t = {} is below 1e-14",
            s.norm_dev, s.t
        )));
    }
    let m = tail.len() as f64;
    let tm = tail.iter().map(|s| s.t).sum::<f64>() / m;
    let ym = tail.iter().map(|s| s.norm_dev.ln()).sum::<f64>() / m;
    let (num, den) = tail.iter().fold((0.0, 0.0), |(num, den), s| {
        let dt = s.t - tm;
        (num + dt * (s.norm_dev.ln() - ym), den + dt * dt)
    });
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    /// `max |mean(h(t)) - mean(h0)|`.
    pub mean_drift: f64,
    pub i_star: Vec<f64>,
    /// Largest per-step increase of `I*`, relative to `max(1, |I*(h0)|)`.
    pub max_increase: f64,
    pub nonincreasing: bool,
}

/// Volume drift and the `I*` sequence; `I*` counts as nonincreasing when no
/// step raises it by more than `1e-9` relative.
pub fn monitor_invariants(traj: &Trajectory) -> InvariantReport {
    let d = &traj.diagnostics;
    let m0 = d[0].mean;
    let mean_drift = d.iter().map(|s| (s.mean - m0).abs()).fold(0.0, f64::max);
    let i_star: Vec<f64> = d.iter().map(|s| s.i_star).collect();
    let scale = i_star[0].abs().max(1.0);
    let max_increase = i_star.windows(2).map(|w| (w[1] - w[0]) / scale).fold(0.0, f64::max);
    InvariantReport {
        mean_drift,
        i_star,
        max_increase,
        nonincreasing: max_increase <= 1e-9,
    }
}

/// CSV with header `t,norm_dev,mean,I_star`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let header = ["t", "norm_dev", "mean", "I_star"].map(String::from);
    let mut w = csv_writer(out, &header)?;
    for s in &traj.diagnostics {
        w.write_record([s.t, s.norm_dev, s.mean, s.i_star].map(float))
            .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}
