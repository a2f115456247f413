use super::classify::{classify_analysis, StabilityVerdict};
use super::{mean_defect, realness_defect};
use crate::error::{Error, Result};
use crate::model::{Grid1D, GridSpec, ModelParams};
use crate::output::{csv_error, csv_writer, float};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

pub const SWEEP_HEADER: &str = "l,H,omega1,omega2,kappa,verdict,lambda1,mu_min,kernel_dim,semisimple";

/// One analyzed parameter row.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub params: ModelParams,
    /// The verdict, or the error message for this row.
    pub outcome: std::result::Result<StabilityVerdict, String>,
    /// Largest relative imaginary part over the resolved spectrum.
    pub max_imag: f64,
    /// Largest relative mean over the resolved eigenvectors.
    pub max_mean: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

/// CSV record matching [`SWEEP_HEADER`]; failed rows carry verdict `Error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub l: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub kappa: f64,
    pub verdict: String,
    pub lambda1: Option<f64>,
    pub mu_min: Option<f64>,
    pub kernel_dim: Option<usize>,
    pub semisimple: Option<bool>,
}

impl From<&SweepRow> for SweepRecord {
    fn from(r: &SweepRow) -> Self {
        let p = &r.params;
        let (verdict, v) = match &r.outcome {
            Ok(v) => (v.class.to_string(), Some(v)),
            Err(_) => ("Error".to_string(), None),
        };
        SweepRecord {
            l: p.l,
            h: p.h,
            omega1: p.omega1,
            omega2: p.omega2,
            kappa: p.kappa,
            verdict,
            lambda1: v.map(|v| v.leading_lambda),
            mu_min: v.map(|v| v.threshold_margin),
            kernel_dim: v.map(|v| v.kernel_dim),
            semisimple: v.map(|v| v.semisimple),
        }
    }
}

fn analyze_row(p: &ModelParams, grid: &std::result::Result<Arc<Grid1D>, String>) -> SweepRow {
    let run = || -> Result<(StabilityVerdict, f64, f64)> {
        let grid = grid.as_ref().map_err(|e| Error::InvalidGrid(e.clone()))?;
        let (v, a) = classify_analysis(p, grid)?;
        let imag = realness_defect(&a.asm, &a.spectrum)?;
        Ok((v, imag, mean_defect(&a.asm, &a.spectrum)))
    };
    match run() {
        Ok((v, max_imag, max_mean)) => SweepRow {
            params: *p,
            outcome: Ok(v),
            max_imag,
            max_mean,
        },
        Err(e) => SweepRow {
            params: *p,
            outcome: Err(e.to_string()),
            max_imag: f64::NAN,
            max_mean: f64::NAN,
        },
    }
}

type GridCache = HashMap<u64, std::result::Result<Arc<Grid1D>, String>>;

fn distinct_lengths(params: &[ModelParams]) -> Vec<f64> {
    let mut ls: Vec<f64> = params.iter().map(|p| p.l).collect();
    ls.sort_by(f64::total_cmp);
    ls.dedup_by(|a, b| a.to_bits() == b.to_bits());
    ls
}

fn build_grid(spec: &GridSpec, l: f64) -> (u64, std::result::Result<Arc<Grid1D>, String>) {
    (l.to_bits(), spec.build(l).map(Arc::new).map_err(|e| e.to_string()))
}

/// Row-by-row sweep on the current thread.
pub fn sweep_sequential(params: &[ModelParams], spec: &GridSpec) -> SweepTable {
    let cache: GridCache = distinct_lengths(params)
        .into_iter()
        .map(|l| build_grid(spec, l))
        .collect();
    SweepTable {
        rows: params.iter().map(|p| analyze_row(p, &cache[&p.l.to_bits()])).collect(),
    }
}

/// Rows analyzed in parallel; output keeps input order.
#[cfg(feature = "parallel")]
pub fn sweep_parallel(params: &[ModelParams], spec: &GridSpec) -> SweepTable {
    use rayon::prelude::*;
    let cache: GridCache = distinct_lengths(params)
        .into_par_iter()
        .map(|l| build_grid(spec, l))
        .collect();
    SweepTable {
        rows: params
            .par_iter()
            .map(|p| analyze_row(p, &cache[&p.l.to_bits()]))
            .collect(),
    }
}

/// Parallel when the `parallel` feature is enabled.
pub fn sweep(params: &[ModelParams], spec: &GridSpec) -> SweepTable {
    #[cfg(feature = "parallel")]
    {
        sweep_parallel(params, spec)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sweep_sequential(params, spec)
    }
}

pub fn write_sweep_csv<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let header: Vec<String> = SWEEP_HEADER.split(',').map(str::to_string).collect();
    let mut w = csv_writer(out, &header)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &table.rows {
        let rec = SweepRecord::from(r);
        w.write_record([
            float(rec.l),
            float(rec.h),
            float(rec.omega1),
            float(rec.omega2),
            float(rec.kappa),
            rec.verdict,
            opt(rec.lambda1.map(float)),
            opt(rec.mu_min.map(float)),
            opt(rec.kernel_dim.map(|k| k.to_string())),
            opt(rec.semisimple.map(|b| b.to_string())),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if header.join(",") != SWEEP_HEADER {
        return Err(Error::Config(format!("unexpected header '{}'", header.join(","))));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<SweepRecord>, _>>()
        .map_err(csv_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::Verdict;

    fn classes(t: &SweepTable) -> Vec<Verdict> {
        t.rows.iter().map(|r| r.outcome.as_ref().unwrap().class).collect()
    }

    #[test]
    fn sweep_examples() {
        use Verdict::*;
        let spec = GridSpec::chebyshev(33);
        let base = ModelParams::flat(1.0, 0.0).unwrap();
        let omegas: Vec<_> = [0.5, 1.0, 4.0]
            .iter()
            .map(|&w| base.with_omega_plus(w).unwrap())
            .collect();
        assert_eq!(
            classes(&sweep(&omegas, &spec)),
            [NormallyStable, NormallyStable, Unstable]
        );
        let base2 = ModelParams::flat(1.0, 2.0).unwrap();
        let ls: Vec<_> = [0.5, 0.9, 1.5].iter().map(|&l| base2.with_length(l).unwrap()).collect();
        assert_eq!(classes(&sweep(&ls, &spec)), [NormallyStable, NormallyStable, Unstable]);
        let ks: Vec<_> = [0.5, 3.0, 3.3].iter().map(|&k| base.with_kappa(k).unwrap()).collect();
        assert_eq!(classes(&sweep(&ks, &spec)), [NormallyStable, NormallyStable, Unstable]);
    }

    #[test]
    fn sequential_matches_default_and_csv_round_trips() {
        let spec = GridSpec::chebyshev(17);
        let base = ModelParams::flat(1.0, 0.0).unwrap();
        let mut params: Vec<_> = (0..6).map(|i| base.with_omega_plus(i as f64).unwrap()).collect();
        params.push(ModelParams { l: -1.0, ..base });
        let a = sweep(&params, &spec);
        let b = sweep_sequential(&params, &spec);
        assert!(a.rows[6].outcome.is_err());
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        write_sweep_csv(&a, &mut ca).unwrap();
        write_sweep_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with(SWEEP_HEADER));
        let recs = read_sweep_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 7);
        assert_eq!(recs[6].verdict, "Error");
        let l1 = a.rows[0].outcome.as_ref().unwrap().leading_lambda;
        assert!((recs[0].lambda1.unwrap() - l1).abs() <= 1e-12 * l1.abs());
        assert_eq!(recs[6].lambda1, None);
    }
}
