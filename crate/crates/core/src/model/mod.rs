//! Parameters, grids and discrete height fields shared by every analysis.
//!
//! Sign convention for the wall parameters: `omega_i > 0` when the bulk
//! domain bulges outward at contact point `i` (a wall that curves away from
//! the bulk), `omega_i < 0` when the wall bulges into the bulk.

mod grid;
pub mod quadrature;

pub use grid::{Basis, Grid1D, GridSpec};

use crate::error::{Error, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Dimensionless parameters of a flat or circular-arc equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Interface length.
    pub l: f64,
    /// Half-depth of the reference bulk strip.
    #[serde(rename = "H")]
    pub h: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// Equilibrium curvature, `-1/R` for an arc of radius `R`.
    pub kappa: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            l: 1.0,
            h: 1.0,
            omega1: 0.0,
            omega2: 0.0,
            kappa: 0.0,
        }
    }
}

impl ModelParams {
    pub fn new(l: f64, h: f64, omega1: f64, omega2: f64, kappa: f64) -> Result<Self> {
        validate_params(Self {
            l,
            h,
            omega1,
            omega2,
            kappa,
        })
    }

    /// Flat interface with equal wall parameters at both ends.
    pub fn flat(l: f64, omega: f64) -> Result<Self> {
        Self::new(l, 1.0, omega, omega, 0.0)
    }

    pub fn with_depth(self, h: f64) -> Result<Self> {
        validate_params(Self { h, ..self })
    }

    pub fn with_omega_plus(self, omega: f64) -> Result<Self> {
        validate_params(Self {
            omega1: omega,
            omega2: omega,
            ..self
        })
    }

    pub fn with_length(self, l: f64) -> Result<Self> {
        validate_params(Self { l, ..self })
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        validate_params(Self { kappa, ..self })
    }

    /// Flat key-value form, one `key = value` per line.
    pub fn to_config_string(&self) -> String {
        format!(
            "l = {:e}\nH = {:e}\nomega1 = {:e}\nomega2 = {:e}\nkappa = {:e}\n",
            self.l, self.h, self.omega1, self.omega2, self.kappa
        )
    }

    /// Parses the keys `l, H, omega1, omega2, kappa`; missing keys take the
    /// defaults, unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for (key, value) in parse_key_values(text)? {
            p.set(&key, &value)?;
        }
        validate_params(p)
    }

    /// Sets one parameter by its config key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}' as a number")))?;
        match key {
            "l" => self.l = v,
            "H" => self.h = v,
            "omega1" => self.omega1 = v,
            "omega2" => self.omega2 = v,
            "kappa" => self.kappa = v,
            _ => return Err(Error::Config(format!("unknown parameter key '{key}'"))),
        }
        Ok(())
    }
}

/// Checks `l > 0`, `H > 0`, finiteness and `|kappa| l < 2 pi`.
pub fn validate_params(p: ModelParams) -> Result<ModelParams> {
    if !(p.l > 0.0) || !p.l.is_finite() {
        return Err(Error::NonPositiveLength { what: "l", value: p.l });
    }
    if !(p.h > 0.0) || !p.h.is_finite() {
        return Err(Error::NonPositiveLength { what: "H", value: p.h });
    }
    for (name, v) in [("omega1", p.omega1), ("omega2", p.omega2), ("kappa", p.kappa)] {
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} = {v} is not finite")));
        }
    }
    let product = p.kappa.abs() * p.l;
    if product >= 2.0 * PI {
        return Err(Error::GeometricConstraintViolated { product });
    }
    Ok(p)
}

/// Splits `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Nodal values of a perturbation on a shared grid.
#[derive(Debug, Clone)]
pub struct HeightField {
    pub grid: Arc<Grid1D>,
    pub values: DVector<f64>,
}

impl HeightField {
    pub fn new(grid: Arc<Grid1D>, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.n()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite field value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid1D>, f: impl Fn(f64) -> f64) -> Self {
        let values = DVector::from_iterator(grid.n(), grid.nodes().iter().map(|&x| f(x)));
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid1D>) -> Self {
        let n = grid.n();
        Self {
            grid,
            values: DVector::zeros(n),
        }
    }

    /// `(1/l) * integral of h` by the grid quadrature.
    pub fn mean(&self) -> f64 {
        self.grid.mean(self.values.as_slice())
    }

    pub fn norm_l2(&self) -> f64 {
        self.grid.l2_sq(self.values.as_slice()).max(0.0).sqrt()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Free-function form of [`HeightField::mean`].
pub fn mean(h: &HeightField) -> f64 {
    h.mean()
}
