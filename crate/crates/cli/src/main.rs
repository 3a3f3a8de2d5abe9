//! `tclctl`: scenario runs for optimal decoherence control.
//!
//! Exit codes: 0 success, 2 configuration error, 3 sweep non-convergence,
//! 4 numerical evaluation error, 1 I/O error.

mod output;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use tcl_control::analysis::{self, ControllabilityCell, TABLE_KBT, TABLE_R};
use tcl_control::config::Config;
use tcl_control::{
    coefficient_trace, integrate, parse_config, solve_fbsm, CoefficientMethod, ControlField, Error,
    Scenario, TimeGrid, Trajectory,
};

use output::{num, write_metadata, CsvOut};

#[derive(Parser)]
#[command(name = "tclctl", version, about = "Optimal decoherence control in a non-Markovian Ohmic reservoir")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (key = value lines under [section] headers).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; each scenario writes into its own subdirectory.
    #[arg(long)]
    out: PathBuf,
    /// Number of scenarios run concurrently (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides the coefficient method of the scenario file.
    #[arg(long, value_parser = parse_method)]
    method: Option<CoefficientMethod>,
    /// Reserved; every pipeline is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate Δ(t) and γ(t).
    Coefficients(Common),
    /// Integrate the uncontrolled, target and (optionally) a controlled evolution.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Control CSV with columns t, ux, uy (as written by `optimize`).
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// Solve the optimal control problem by forward-backward sweeping.
    Optimize(Common),
    /// Power spectra of the optimal (or a supplied) control.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// Controllability classification over the kBT × r grid.
    Table(Common),
}

fn parse_method(s: &str) -> Result<CoefficientMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NonConvergence(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    fn category(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::NonConvergence(_) => "non-convergence",
            Self::Numerical(_) => "numerical",
            Self::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::NonConvergence(_) => 3,
            Self::Numerical(_) => 4,
            Self::Io(_) => 1,
        }
    }

    /// Worse outcomes win when several scenarios fail.
    fn severity(&self) -> u8 {
        match self {
            Self::NonConvergence(_) => 0,
            Self::Numerical(_) => 1,
            Self::Config(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Self::Config(m) | Self::NonConvergence(m) | Self::Numerical(m) | Self::Io(m)) = self;
        write!(f, "error[{}]: {}", self.category(), m.replace('\n', " "))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Validation(_) | Error::InvalidParameter(_) => Self::Config(e.to_string()),
            Error::NonConvergence { .. } => Self::NonConvergence(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Coefficients(c) => per_scenario(&c, |s, dir| coefficients(s, c.method, dir)),
        Command::Evolve { common, control } => {
            per_scenario(&common, |s, dir| evolve(s, method(s, &common), control.as_deref(), dir))
        }
        Command::Optimize(c) => per_scenario(&c, |s, dir| optimize(s, method(s, &c), dir)),
        Command::Spectrum { common, control } => {
            per_scenario(&common, |s, dir| spectrum(s, method(s, &common), control.as_deref(), dir))
        }
        Command::Table(c) => table(&c),
    }
}

fn method(s: &Scenario, c: &Common) -> CoefficientMethod {
    c.method.unwrap_or(s.coefficient_method)
}

fn load(c: &Common) -> Result<Config, CliError> {
    let text = fs::read_to_string(&c.config).map_err(|e| CliError::Config(format!("{}: {e}", c.config.display())))?;
    Ok(parse_config(&text)?)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))
}

fn scenario_dir(out: &Path, label: &str) -> Result<PathBuf, CliError> {
    let dir = out.join(label);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

/// Settings, defaults and run options shared by every metadata file.
fn base_metadata(s: &Scenario, config: &Config, c: &Common) -> Vec<(String, String)> {
    let mut m: Vec<(String, String)> = s.settings().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    m.push(("defaulted".into(), config.defaulted.join(",")));
    m.push(("method".into(), method(s, c).to_string()));
    m.push(("seed".into(), c.seed.map_or("none".into(), |v| v.to_string())));
    m.push(("version".into(), env!("CARGO_PKG_VERSION").into()));
    m
}

type Meta = Vec<(String, String)>;

/// Metadata of a finished scenario plus a deferred failure (non-convergence)
/// whose outputs were still written.
type Outcome = (Meta, Option<CliError>);

fn per_scenario<F>(c: &Common, f: F) -> Result<(), CliError>
where
    F: Fn(&Scenario, &Path) -> Result<Outcome, CliError> + Sync,
{
    let config = load(c)?;
    let results: Vec<Result<(), CliError>> = pool(c.jobs)?.install(|| {
        config
            .scenarios
            .par_iter()
            .map(|s| {
                let dir = scenario_dir(&c.out, &s.label)?;
                let mut meta = base_metadata(s, &config, c);
                let failure = match f(s, &dir) {
                    Ok((extra, deferred)) => {
                        meta.extend(extra);
                        deferred
                    }
                    Err(e) => Some(e),
                };
                let status = failure.as_ref().map_or_else(|| "ok".to_string(), |e| e.to_string());
                meta.push(("status".into(), status.clone()));
                write_metadata(&dir, "metadata.txt", &meta)?;
                println!("{}: {status}", s.label);
                failure.map_or(Ok(()), Err)
            })
            .collect()
    });
    results
        .into_iter()
        .filter_map(Result::err)
        .max_by_key(CliError::severity)
        .map_or(Ok(()), Err)
}

fn coefficients(s: &Scenario, only: Option<CoefficientMethod>, dir: &Path) -> Result<Outcome, CliError> {
    let methods: Vec<CoefficientMethod> = only.map_or_else(|| CoefficientMethod::ALL.to_vec(), |m| vec![m]);
    let mut meta = Vec::new();
    for m in methods {
        let trace = coefficient_trace(&s.grid, &s.params, m)?;
        let mut out = CsvOut::create(
            dir,
            &format!("coefficients_{}.csv", m.name()),
            &["t(1/omega0)", "delta(omega0)", "gamma(omega0)", "method"],
        )?;
        for k in 0..trace.len() {
            out.row([num(trace.grid.time(k)), num(trace.delta[k]), num(trace.gamma[k]), m.name().to_string()])?;
        }
        out.finish()?;
        let n_quad = trace.from_quadrature.iter().filter(|&&q| q).count();
        meta.push((format!("{}.quadrature_samples", m.name()), n_quad.to_string()));
    }
    Ok((meta, None))
}

fn write_trajectory(dir: &Path, name: &str, traj: &Trajectory) -> Result<(), CliError> {
    let mut out = CsvOut::create(dir, name, &["t(1/omega0)", "x1", "x2", "x3", "coherence"])?;
    for (k, x) in traj.states.iter().enumerate() {
        out.row([num(traj.grid.time(k)), num(x.x1), num(x.x2), num(x.x3), num(analysis::coherence(x))])?;
    }
    out.finish().map(|_| ())
}

fn write_control(dir: &Path, name: &str, control: &ControlField) -> Result<(), CliError> {
    let mut out = CsvOut::create(dir, name, &["t(1/omega0)", "ux(omega0)", "uy(omega0)"])?;
    for k in 0..control.grid.len() {
        out.row([num(control.grid.time(k)), num(control.ux[k]), num(control.uy[k])])?;
    }
    out.finish().map(|_| ())
}

/// Reads a `t,ux,uy` CSV written on a uniform grid starting at 0 and
/// resamples it onto `grid`.
fn read_control(path: &Path, grid: TimeGrid) -> Result<ControlField, CliError> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let (mut ts, mut ux, mut uy) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |j: usize| -> Result<f64, CliError> {
            rec.get(j)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(format!("row {}: column {} is not a number", i + 2, j + 1)))
        };
        ts.push(field(0)?);
        ux.push(field(1)?);
        uy.push(field(2)?);
    }
    if ts.len() < 2 || ts[0] != 0.0 {
        return Err(bad("control must have at least two rows starting at t = 0".into()));
    }
    let n = ts.len() - 1;
    let file_grid = TimeGrid::new(0.0, ts[n], n)?;
    let h = file_grid.step();
    if ts.iter().enumerate().any(|(k, &t)| (t - k as f64 * h).abs() > 1e-9 * ts[n].max(1.0)) {
        return Err(bad("control times are not uniformly spaced".into()));
    }
    let field = ControlField::new(file_grid, ux, uy)?;
    Ok(if file_grid == grid { field } else { field.resample(grid) })
}

fn evolve(s: &Scenario, m: CoefficientMethod, control: Option<&Path>, dir: &Path) -> Result<Outcome, CliError> {
    let coeffs = coefficient_trace(&s.grid, &s.params, m)?;
    let uncontrolled = integrate(&s.x0, &ControlField::zeros(s.grid), &coeffs)?;
    write_trajectory(dir, "evolve_uncontrolled.csv", &uncontrolled)?;
    write_trajectory(dir, "evolve_target.csv", &Trajectory::target(s.grid, &s.x0, s.params.omega0))?;
    let mut meta = vec![("uncontrolled.retention".into(), num(analysis::retention(&uncontrolled)))];
    if let Some(path) = control {
        let u = read_control(path, s.grid)?;
        let controlled = integrate(&s.x0, &u, &coeffs)?;
        write_trajectory(dir, "evolve_controlled.csv", &controlled)?;
        meta.push(("control".into(), path.display().to_string()));
        meta.push(("controlled.retention".into(), num(analysis::retention(&controlled))));
    }
    Ok((meta, None))
}

fn optimize(s: &Scenario, m: CoefficientMethod, dir: &Path) -> Result<Outcome, CliError> {
    let coeffs = coefficient_trace(&s.grid, &s.params, m)?;
    let r = solve_fbsm(&s.x0, &coeffs, &s.weights, &s.sweep)?;
    write_trajectory(dir, "state.csv", &r.state)?;
    let mut out = CsvOut::create(dir, "costate.csv", &["t(1/omega0)", "lambda1", "lambda2", "lambda3"])?;
    for (k, l) in r.costate.states.iter().enumerate() {
        out.row([num(s.grid.time(k)), num(l.x1), num(l.x2), num(l.x3)])?;
    }
    out.finish()?;
    write_control(dir, "control.csv", &r.control)?;
    let mut out = CsvOut::create(dir, "cost_history.csv", &["iteration", "cost"])?;
    for (i, j) in r.cost_history.iter().enumerate() {
        out.row([i.to_string(), num(*j)])?;
    }
    out.finish()?;
    let meta = vec![
        ("converged".into(), r.converged.to_string()),
        ("iterations".into(), r.iterations.to_string()),
        ("initial_cost".into(), num(r.cost_history[0])),
        ("final_cost".into(), num(r.final_cost())),
        ("stationarity_residual".into(), num(r.stationarity_residual)),
        ("max_abs_control".into(), num(r.control.max_abs())),
        ("retention".into(), num(analysis::retention(&r.state))),
    ];
    let deferred = (!r.converged).then(|| {
        CliError::NonConvergence(format!("{}: sweep did not converge after {} iterations", s.label, r.iterations))
    });
    Ok((meta, deferred))
}

fn write_spectra(dir: &Path, prefix: &str, control: &ControlField, meta: &mut Meta) -> Result<(), CliError> {
    let h = control.grid.step();
    for (channel, samples) in [("ux", &control.ux), ("uy", &control.uy)] {
        let spec = analysis::power_spectrum(samples, h)?;
        let mut out = CsvOut::create(dir, &format!("{prefix}_{channel}.csv"), &["omega(omega0)", "power(arb)"])?;
        for (w, p) in spec.freqs.iter().zip(&spec.power) {
            out.row([num(*w), num(*p)])?;
        }
        out.finish()?;
    }
    let bw = analysis::control_bandwidth(control, analysis::DEFAULT_ENERGY_FRACTION)
        .map_or_else(|_| "undefined".to_string(), num);
    meta.push((format!("{prefix}.bandwidth"), bw));
    Ok(())
}

fn spectrum(s: &Scenario, m: CoefficientMethod, control: Option<&Path>, dir: &Path) -> Result<Outcome, CliError> {
    let mut meta = vec![("energy_fraction".into(), num(analysis::DEFAULT_ENERGY_FRACTION))];
    match control {
        Some(path) => {
            let u = read_control(path, s.grid)?;
            write_spectra(dir, "spectrum", &u, &mut meta)?;
        }
        None => {
            let coeffs = coefficient_trace(&s.grid, &s.params, m)?;
            let optimal = solve_fbsm(&s.x0, &coeffs, &s.weights, &s.sweep)?;
            write_spectra(dir, "spectrum", &optimal.control, &mut meta)?;
            let markov = tcl_control::markovian_control(&s.x0, &s.params, &s.grid, &s.weights, &s.sweep)?;
            write_spectra(dir, "spectrum_markovian", &markov.control, &mut meta)?;
            meta.push(("converged".into(), optimal.converged.to_string()));
            meta.push(("markovian.converged".into(), markov.converged.to_string()));
        }
    }
    Ok((meta, None))
}

fn table(c: &Common) -> Result<(), CliError> {
    let config = load(c)?;
    let base = &config.base;
    let (kbts, rs) = config.batch.clone().unwrap_or_else(|| (TABLE_KBT.to_vec(), TABLE_R.to_vec()));
    let m = method(base, c);
    let dir = scenario_dir(&c.out, &base.label)?;
    let th = config.thresholds;
    let cells: Vec<ControllabilityCell> = pool(c.jobs)?.install(|| {
        analysis::controllability_table(&kbts, &rs, &base.params, &base.x0, &base.grid, m, &base.weights, &base.sweep, &th)
    })?;
    let mut out = CsvOut::create(
        &dir,
        "table.csv",
        &[
            "r",
            "kBT(omega0)",
            "label",
            "uncontrolled_retention",
            "markovian_retention",
            "non_markovian_retention",
            "markovian_converged",
            "non_markovian_converged",
            "notes",
        ],
    )?;
    for cell in &cells {
        out.row([
            num(cell.r),
            num(cell.kbt),
            cell.label.name().to_string(),
            num(cell.uncontrolled_retention),
            num(cell.markovian_retention),
            num(cell.non_markovian_retention),
            cell.markovian_converged.to_string(),
            cell.non_markovian_converged.to_string(),
            cell.notes.join("; "),
        ])?;
        println!("r={} kBT={}: {}", cell.r, cell.kbt, cell.label);
    }
    out.finish()?;
    let mut meta = base_metadata(base, &config, c);
    meta.push(("table.slow_decay".into(), num(th.slow_decay)));
    meta.push(("table.gain".into(), num(th.gain)));
    meta.push(("table.floor".into(), num(th.floor)));
    meta.push(("table.kBT".into(), kbts.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")));
    meta.push(("table.r".into(), rs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")));
    meta.push(("status".into(), "ok".into()));
    write_metadata(&dir, "metadata.txt", &meta)?;
    Ok(())
}
