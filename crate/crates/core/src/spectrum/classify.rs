use super::assembly::{assemble_operator, Assembly};
use super::solve::{rayleigh, solve_spectrum, Spectrum};
use crate::error::{Error, Result};
use crate::forms::min_form_meanfree;
use crate::kernel::{kernel, KernelDescription};
use crate::model::{Grid1D, GridSpec, ModelParams};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    NormallyStable,
    Unstable,
    Degenerate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NormallyStable => "NormallyStable",
            Verdict::Unstable => "Unstable",
            Verdict::Degenerate => "Degenerate",
        })
    }
}

impl FromStr for Verdict {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NormallyStable" => Ok(Verdict::NormallyStable),
            "Unstable" => Ok(Verdict::Unstable),
            "Degenerate" => Ok(Verdict::Degenerate),
            _ => Err(Error::Config(format!("unknown verdict '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub class: Verdict,
    /// Largest eigenvalue of `-A` outside the zero group.
    pub leading_lambda: f64,
    pub kernel_dim: usize,
    pub semisimple: bool,
    /// Minimum of `I*` over unit mean-free fields.
    pub threshold_margin: f64,
}

/// Eigenvalues (Rayleigh-refined) with the zero group removed, descending.
pub(crate) struct Analysis {
    pub asm: Assembly,
    pub spectrum: Spectrum,
    pub kernel: KernelDescription,
    pub lambdas: Vec<f64>,
}

pub(crate) fn analyze(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<Analysis> {
    let asm = assemble_operator(p, grid)?;
    let spectrum = solve_spectrum(&asm)?;
    let kernel = kernel(p, grid)?;
    let mut lambdas: Vec<f64> = (0..spectrum.lambdas.len())
        .map(|j| rayleigh(&asm, spectrum.vectors.column(j).as_slice()))
        .collect();
    // A mean-free kernel element lies in the constrained subspace and shows
    // up there as a zero eigenvalue; match it against the closed form.
    if !kernel.semisimple {
        let scale = super::solve::lambda_scale(&asm);
        for k in &kernel.basis {
            let kv = k.field.values.as_slice();
            let kk = grid.l2_sq(kv);
            let hit = (0..lambdas.len()).find(|&j| {
                let h = spectrum.vectors.column(j);
                let hv = h.as_slice();
                let dot = grid.integrate(&hv.iter().zip(kv).map(|(a, b)| a * b).collect::<Vec<_>>());
                lambdas[j].abs() <= 1e-6 * scale && dot * dot >= (1.0 - 1e-6) * kk * grid.l2_sq(hv)
            });
            if let Some(j) = hit {
                lambdas[j] = f64::NAN;
            }
        }
    }
    lambdas.retain(|v| !v.is_nan());
    lambdas.sort_by(|a, b| b.total_cmp(a));
    if lambdas.len() < 2 {
        return Err(Error::EigensolverFailure("fewer than two resolved eigenvalues".into()));
    }
    Ok(Analysis {
        asm,
        spectrum,
        kernel,
        lambdas,
    })
}

fn verdict_from(a: &Analysis, mu_min: f64) -> StabilityVerdict {
    let l1 = a.lambdas[0];
    let tol = 1e-7 * a.lambdas[1].abs();
    let k = &a.kernel;
    let class = if l1 > tol {
        Verdict::Unstable
    } else if l1 < -tol && k.semisimple && !k.degenerate && k.dimension == 1 {
        Verdict::NormallyStable
    } else {
        Verdict::Degenerate
    };
    StabilityVerdict {
        class,
        leading_lambda: l1,
        kernel_dim: k.dimension,
        semisimple: k.semisimple,
        threshold_margin: mu_min,
    }
}

pub(crate) fn classify_analysis(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<(StabilityVerdict, Analysis)> {
    let a = analyze(p, grid)?;
    let (mu, _) = min_form_meanfree(p, grid)?;
    Ok((verdict_from(&a, mu), a))
}

pub fn classify(p: &ModelParams, grid: &Arc<Grid1D>) -> Result<StabilityVerdict> {
    classify_analysis(p, grid).map(|(v, _)| v)
}

/// [`classify`] on a grid built from `spec` for `p.l`.
pub fn classify_with(p: &ModelParams, spec: &GridSpec) -> Result<StabilityVerdict> {
    classify(p, &Arc::new(spec.build(p.l)?))
}

/// Parameter varied by [`find_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vary {
    /// Both wall curvatures together.
    OmegaPlus,
    Length,
    Kappa,
}

impl Vary {
    pub fn apply(self, p: &ModelParams, value: f64) -> Result<ModelParams> {
        match self {
            Vary::OmegaPlus => p.with_omega_plus(value),
            Vary::Length => p.with_length(value),
            Vary::Kappa => p.with_kappa(value),
        }
    }
}

impl FromStr for Vary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega_plus" | "omega" => Ok(Vary::OmegaPlus),
            "l" | "length" => Ok(Vary::Length),
            "kappa" => Ok(Vary::Kappa),
            _ => Err(Error::Config(format!("cannot vary '{s}'"))),
        }
    }
}

/// Leading eigenvalue on the constrained subspace, Rayleigh-refined.
fn leading(p: &ModelParams, spec: &GridSpec) -> Result<f64> {
    let grid = Arc::new(spec.build(p.l)?);
    let asm = assemble_operator(p, &grid)?;
    let s = solve_spectrum(&asm)?;
    Ok(rayleigh(&asm, s.vectors.column(0).as_slice()))
}

/// Bisection on the sign of the leading eigenvalue until the bracket is
/// narrower than `tol`.
pub fn find_threshold(p: &ModelParams, vary: Vary, bracket: (f64, f64), tol: f64, spec: &GridSpec) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad bracket ({lo}, {hi}) or tolerance {tol}"
        )));
    }
    let f = |v: f64| -> Result<f64> { leading(&vary.apply(p, v)?, spec) };
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let lo_positive = flo > 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
