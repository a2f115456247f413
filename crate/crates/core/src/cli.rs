//! Command-line front end.
//!
//! Every subcommand reads model parameters and grid options from flags and
//! an optional `key = value` config file; flags win. Tabular output is CSV
//! with floats as `{:.12e}`; header lines starting with `#` carry summary
//! values. Exit codes: 0 ok, 1 usage error, 2 numerical failure.

use crate::dtn::oracle_table;
use crate::equilibria::{newton_trace_manifold, params_from_walls, write_manifold_csv, Wall, Walls};
use crate::error::Error;
use crate::evolution::{evolve_with, fit_decay_rate, monitor_invariants, write_trajectory_csv, ModalPropagator};
use crate::kernel::kernel;
use crate::model::{parse_key_values, validate_params, Basis, Grid1D, GridSpec, HeightField, ModelParams};
use crate::output::float;
use crate::spectrum::{classify, find_threshold, leading_eigenvalues, sweep, write_sweep_csv, SweepRecord, Vary};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::f64::consts::PI;
use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Parser, Debug)]
#[command(
    name = "ms-contact",
    version,
    about = "Linearized Mullins-Sekerka contact-line stability analyzer"
)]
struct Cli {
    /// Flat `key = value` file; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// Interface length.
    #[arg(long, global = true, allow_negative_numbers = true)]
    l: Option<f64>,
    /// Half-depth of the bulk strip.
    #[arg(long = "H", alias = "depth", global = true, allow_negative_numbers = true)]
    depth: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    omega1: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    omega2: Option<f64>,
    /// Sets both wall curvatures.
    #[arg(long, alias = "omega-plus", global = true, allow_negative_numbers = true)]
    omega: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    kappa: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// Number of grid nodes.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// `chebyshev` or `p1`.
    #[arg(long, global = true)]
    basis: Option<String>,
    /// Cosine modes in the nonlocal coupling (default n - 1).
    #[arg(long, global = true)]
    modes: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Leading eigenvalues and the stability verdict.
    Spectrum {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Critical parameter by bisection on the leading eigenvalue.
    Threshold {
        /// `omega_plus`, `l` or `kappa`.
        #[arg(long)]
        vary: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Phase-diagram table over a parameter grid.
    Sweep {
        /// `param:lo:hi:count`, repeatable; the first is the outermost loop.
        #[arg(long, allow_hyphen_values = true)]
        vary: Vec<String>,
    },
    /// Linear evolution from initial data.
    Evolve {
        /// Final time (default ten e-folding times of the leading mode).
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// `generic`, `cosine` or `kernel`.
        #[arg(long)]
        init: Option<String>,
        /// Cosine index for `--init cosine`.
        #[arg(long)]
        mode: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        amplitude: Option<f64>,
    },
    /// Closed-form kernel of the linearized operator.
    Kernel,
    /// Equilibrium arcs between two walls by continuation.
    Equilibria {
        /// `circle:cx:cy:r` or `line:px:py:dx:dy`.
        #[arg(long, allow_hyphen_values = true)]
        left: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        right: Option<String>,
        /// Mean heights `lo:hi:count`.
        #[arg(long, allow_hyphen_values = true)]
        m: Option<String>,
    },
    /// Finite-difference check of the Dirichlet-to-Neumann symbol.
    Oracle {
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        /// Highest mode compared.
        #[arg(long)]
        kmax: Option<usize>,
    },
}

const CONFIG_KEYS: &[&str] = &[
    "l",
    "H",
    "omega1",
    "omega2",
    "omega",
    "kappa",
    "n",
    "basis",
    "modes",
    "count",
    "vary",
    "lo",
    "hi",
    "tol",
    "t_end",
    "steps",
    "init",
    "mode",
    "amplitude",
    "left",
    "right",
    "m",
    "nx",
    "ny",
    "kmax",
];

enum CliError {
    Usage(String),
    Numeric(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::NonPositiveLength { .. }
            | Error::GeometricConstraintViolated { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidGrid(_)
            | Error::UnsupportedWalls(_) => CliError::Usage(e.to_string()),
            e => CliError::Numeric(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(Error::Config(format!("output: {e}")))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Config-file entries; the last occurrence of a key wins.
#[derive(Debug, Default)]
struct Config {
    entries: Vec<(String, String)>,
}

impl Config {
    fn load(path: Option<&PathBuf>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let entries = parse_key_values(&text)?;
        if let Some((k, _)) = entries.iter().find(|(k, _)| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key '{k}'")));
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn get_all(&self, key: &str) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .collect()
    }
}

/// Flag value, else config value, else `None`.
fn pick<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str) -> CliResult<Option<T>>
where
    T::Err: Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    match cfg.get(key) {
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("config key {key}: cannot parse '{v}': {e}"))),
        None => Ok(None),
    }
}

/// Resolved parameters, grid and the per-command config.
struct RunConfig {
    params: ModelParams,
    grid: GridSpec,
    config: Config,
    json: bool,
}

impl RunConfig {
    fn from_cli(cli: &Cli, default_n: usize) -> CliResult<Self> {
        let config = Config::load(cli.config.as_ref())?;
        let m = &cli.model;
        let mut p = ModelParams::default();
        if let Some(v) = pick(m.l, &config, "l")? {
            p.l = v;
        }
        if let Some(v) = pick(m.depth, &config, "H")? {
            p.h = v;
        }
        // explicit per-wall values override the shared one
        if let Some(v) = pick(m.omega, &config, "omega")? {
            p.omega1 = v;
            p.omega2 = v;
        }
        if let Some(v) = pick(m.omega1, &config, "omega1")? {
            p.omega1 = v;
        }
        if let Some(v) = pick(m.omega2, &config, "omega2")? {
            p.omega2 = v;
        }
        if let Some(v) = pick(m.kappa, &config, "kappa")? {
            p.kappa = v;
        }
        let g = &cli.grid;
        let n = pick(g.n, &config, "n")?.unwrap_or(default_n);
        let basis = match pick(g.basis.clone(), &config, "basis")? {
            Some(b) => b.parse::<Basis>()?,
            None => Basis::Chebyshev,
        };
        let modes = pick(g.modes, &config, "modes")?;
        Ok(Self {
            params: p,
            grid: GridSpec { n, basis, modes },
            config,
            json: cli.json,
        })
    }

    fn valid_params(&self) -> CliResult<ModelParams> {
        Ok(validate_params(self.params)?)
    }

    fn build_grid(&self, l: f64) -> CliResult<Arc<Grid1D>> {
        Ok(Arc::new(self.grid.build(l)?))
    }
}

/// Runs the command line `argv` (including the program name), writing
/// results to `out` and diagnostics to `err`; returns the exit code.
pub fn run_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nFor usage, run with --help.");
            1
        }
        Err(CliError::Numeric(e)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

/// [`run_with`] on the process's standard streams.
pub fn run(argv: &[String]) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run_with(argv, &mut out, &mut err);
    let _ = out.flush();
    code
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let default_n = match cli.command {
        Command::Equilibria { .. } => 33,
        _ => 129,
    };
    let rc = RunConfig::from_cli(cli, default_n)?;
    match &cli.command {
        Command::Spectrum { count } => cmd_spectrum(&rc, *count, out),
        Command::Threshold { vary, lo, hi, tol } => cmd_threshold(&rc, vary.clone(), *lo, *hi, *tol, out),
        Command::Sweep { vary } => cmd_sweep(&rc, vary, out, err),
        Command::Evolve {
            t_end,
            steps,
            init,
            mode,
            amplitude,
        } => cmd_evolve(&rc, *t_end, *steps, init.clone(), *mode, *amplitude, out, err),
        Command::Kernel => cmd_kernel(&rc, out),
        Command::Equilibria { left, right, m } => cmd_equilibria(&rc, left.clone(), right.clone(), m.clone(), out, err),
        Command::Oracle { nx, ny, kmax } => cmd_oracle(&rc, *nx, *ny, *kmax, out),
    }
}

fn json_out(out: &mut dyn Write, v: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Numeric(Error::Config(e.to_string())))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn cmd_spectrum(rc: &RunConfig, count: Option<usize>, out: &mut dyn Write) -> CliResult<()> {
    let p = rc.valid_params()?;
    let count = pick(count, &rc.config, "count")?.unwrap_or(5);
    let grid = rc.build_grid(p.l)?;
    let verdict = classify(&p, &grid)?;
    let pairs = leading_eigenvalues(&p, &grid, count)?;
    if rc.json {
        let eig: Vec<_> = pairs
            .iter()
            .map(|e| json!({"lambda": e.lambda, "residual": e.residual, "energy_defect": e.energy_defect}))
            .collect();
        return json_out(out, &json!({"params": p, "verdict": verdict, "eigenvalues": eig}));
    }
    writeln!(out, "# verdict = {}", verdict.class)?;
    writeln!(out, "# leading_lambda = {}", float(verdict.leading_lambda))?;
    writeln!(out, "# kernel_dim = {}", verdict.kernel_dim)?;
    writeln!(out, "# semisimple = {}", verdict.semisimple)?;
    writeln!(out, "# mu_min = {}", float(verdict.threshold_margin))?;
    writeln!(out, "index,lambda,residual,energy_defect")?;
    for (i, e) in pairs.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            float(e.lambda),
            float(e.residual),
            float(e.energy_defect)
        )?;
    }
    Ok(())
}

fn cmd_threshold(
    rc: &RunConfig,
    vary: Option<String>,
    lo: Option<f64>,
    hi: Option<f64>,
    tol: Option<f64>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let name = pick(vary, &rc.config, "vary")?.ok_or_else(|| CliError::Usage("threshold needs --vary".into()))?;
    let what: Vary = name.parse()?;
    let p = rc.params;
    let (dlo, dhi) = match what {
        Vary::OmegaPlus | Vary::Length => (0.1, 10.0),
        Vary::Kappa => (0.1, 6.0_f64.min(0.999 * 2.0 * PI / p.l)),
    };
    let lo = pick(lo, &rc.config, "lo")?.unwrap_or(dlo);
    let hi = pick(hi, &rc.config, "hi")?.unwrap_or(dhi);
    let tol = pick(tol, &rc.config, "tol")?.unwrap_or(1e-9);
    let t = find_threshold(&p, what, (lo, hi), tol, &rc.grid)?;
    if rc.json {
        return json_out(
            out,
            &json!({"vary": name, "threshold": t, "lo": lo, "hi": hi, "tol": tol}),
        );
    }
    writeln!(out, "vary,threshold")?;
    writeln!(out, "{name},{}", float(t))?;
    Ok(())
}

/// Parses `param:lo:hi:count` into parameter values.
fn parse_range(spec: &str) -> CliResult<(String, Vec<f64>)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Usage(format!("range '{spec}' is not param:lo:hi:count"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let lo: f64 = parts[1].parse().map_err(|_| bad())?;
    let hi: f64 = parts[2].parse().map_err(|_| bad())?;
    let count: usize = parts[3].parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    let values = if count == 1 {
        vec![lo]
    } else {
        (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect()
    };
    Ok((parts[0].to_string(), values))
}

fn set_param(p: &mut ModelParams, key: &str, v: f64) -> CliResult<()> {
    match key {
        "omega" | "omega_plus" => {
            p.omega1 = v;
            p.omega2 = v;
        }
        _ => p.set(key, &v.to_string())?,
    }
    Ok(())
}

fn cmd_sweep(rc: &RunConfig, vary: &[String], out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let specs = if vary.is_empty() {
        rc.config.get_all("vary")
    } else {
        vary.to_vec()
    };
    if specs.is_empty() {
        return Err(CliError::Usage(
            "sweep needs at least one --vary param:lo:hi:count".into(),
        ));
    }
    let ranges = specs.iter().map(|s| parse_range(s)).collect::<CliResult<Vec<_>>>()?;
    let mut rows = vec![rc.params];
    for (key, values) in &ranges {
        let mut next = Vec::with_capacity(rows.len() * values.len());
        for base in &rows {
            for &v in values {
                let mut p = *base;
                set_param(&mut p, key, v)?;
                next.push(p);
            }
        }
        rows = next;
    }
    let table = sweep(&rows, &rc.grid);
    for (i, r) in table.rows.iter().enumerate() {
        if let Err(e) = &r.outcome {
            writeln!(err, "row {i}: {e}")?;
        }
    }
    if rc.json {
        let recs: Vec<SweepRecord> = table.rows.iter().map(SweepRecord::from).collect();
        let v = serde_json::to_value(recs).map_err(|e| CliError::Numeric(Error::Config(e.to_string())))?;
        return json_out(out, &v);
    }
    write_sweep_csv(&table, out)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evolve(
    rc: &RunConfig,
    t_end: Option<f64>,
    steps: Option<usize>,
    init: Option<String>,
    mode: Option<usize>,
    amplitude: Option<f64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let p = rc.valid_params()?;
    let grid = rc.build_grid(p.l)?;
    let steps = pick(steps, &rc.config, "steps")?.unwrap_or(200);
    let init = pick(init, &rc.config, "init")?.unwrap_or_else(|| "generic".into());
    let mode = pick(mode, &rc.config, "mode")?.unwrap_or(1);
    let amp = pick(amplitude, &rc.config, "amplitude")?.unwrap_or(1.0);
    let l = p.l;
    let h0 = match init.as_str() {
        "generic" => HeightField::from_fn(grid.clone(), |x| {
            let t = PI * x / l;
            amp * (t.cos() + 0.5 * (2.0 * t).cos() + 0.25 * (3.0 * t).cos() + 0.1)
        }),
        "cosine" => HeightField::from_fn(grid.clone(), |x| amp * (mode as f64 * PI * x / l).cos()),
        "kernel" => {
            let k = kernel(&p, &grid)?;
            let mut f = k.basis[0].field.clone();
            f.values *= amp;
            f
        }
        other => return Err(CliError::Usage(format!("unknown --init '{other}'"))),
    };
    let prop = ModalPropagator::new(&p, &grid)?;
    let t_end = match pick(t_end, &rc.config, "t_end")? {
        Some(t) => t,
        None => 10.0 / prop.lambdas()[0].abs().max(1e-12),
    };
    let traj = evolve_with(&prop, &h0, t_end, steps)?;
    let report = monitor_invariants(&traj);
    writeln!(err, "mean drift {}", float(report.mean_drift))?;
    writeln!(err, "I* nonincreasing {}", report.nonincreasing)?;
    match fit_decay_rate(&traj) {
        Ok(r) => writeln!(err, "fitted rate {}", float(r))?,
        Err(e) => writeln!(err, "fitted rate unavailable: {e}")?,
    }
    if rc.json {
        return json_out(out, &json!({"params": p, "diagnostics": traj.diagnostics}));
    }
    write_trajectory_csv(&traj, out)?;
    Ok(())
}

fn cmd_kernel(rc: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let p = rc.valid_params()?;
    let grid = rc.build_grid(p.l)?;
    let k = kernel(&p, &grid)?;
    if rc.json {
        let basis: Vec<_> = k
            .basis
            .iter()
            .map(|e| json!({"c": e.c, "A": e.a, "B": e.b, "h0": e.h0, "hl": e.hl, "integral": e.integral}))
            .collect();
        return json_out(
            out,
            &json!({"dimension": k.dimension, "degenerate": k.degenerate, "semisimple": k.semisimple, "basis": basis}),
        );
    }
    writeln!(out, "# dimension = {}", k.dimension)?;
    writeln!(out, "# degenerate = {}", k.degenerate)?;
    writeln!(out, "# semisimple = {}", k.semisimple)?;
    writeln!(out, "index,c,A,B,h0,hl,integral")?;
    for (i, e) in k.basis.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            i + 1,
            float(e.c),
            float(e.a),
            float(e.b),
            float(e.h0),
            float(e.hl),
            float(e.integral)
        )?;
    }
    Ok(())
}

fn parse_wall(spec: &str) -> CliResult<Wall> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Usage(format!("wall '{spec}' is not circle:cx:cy:r or line:px:py:dx:dy"));
    let nums = parts[1..]
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<Vec<f64>>>()?;
    match (parts[0], nums.len()) {
        ("circle", 3) => Ok(Wall::circle([nums[0], nums[1]], nums[2])?),
        ("line", 4) => Ok(Wall::line([nums[0], nums[1]], [nums[2], nums[3]])?),
        _ => Err(bad()),
    }
}

fn cmd_equilibria(
    rc: &RunConfig,
    left: Option<String>,
    right: Option<String>,
    m: Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<()> {
    let need = |v: Option<String>, key: &str| -> CliResult<String> {
        pick(v, &rc.config, key)?.ok_or_else(|| CliError::Usage(format!("equilibria needs --{key}")))
    };
    let walls = Walls::new(parse_wall(&need(left, "left")?)?, parse_wall(&need(right, "right")?)?);
    let (_, ms) = parse_range(&format!("m:{}", need(m, "m")?))?;
    let l = params_from_walls(&walls, ms[0], 1.0)?.l;
    let grid = rc.build_grid(l)?;
    let manifold = newton_trace_manifold(&walls, &ms, &grid)?;
    if let Some(reason) = &manifold.stopped {
        writeln!(
            err,
            "continuation stopped after {} points: {reason}",
            manifold.points.len()
        )?;
    }
    if rc.json {
        let pts: Vec<_> = manifold
            .points
            .iter()
            .map(|p| json!({"m": p.m, "curvature": p.curvature, "residual": p.residual, "u": p.u.values.as_slice()}))
            .collect();
        return json_out(out, &json!({"points": pts, "stopped": manifold.stopped}));
    }
    write_manifold_csv(&manifold, grid.n(), out)?;
    Ok(())
}

fn cmd_oracle(
    rc: &RunConfig,
    nx: Option<usize>,
    ny: Option<usize>,
    kmax: Option<usize>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let p = rc.valid_params()?;
    let nx = pick(nx, &rc.config, "nx")?.unwrap_or(256);
    let ny = pick(ny, &rc.config, "ny")?.unwrap_or(256);
    let kmax = pick(kmax, &rc.config, "kmax")?.unwrap_or(8);
    let rows = oracle_table(&p, (nx, ny), kmax)?;
    if rc.json {
        return json_out(out, &json!({"params": p, "mesh": [nx, ny], "rows": rows}));
    }
    writeln!(out, "k,symbol,fd,rel_err")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.k, float(r.symbol), float(r.fd), float(r.rel_err))?;
    }
    Ok(())
}
