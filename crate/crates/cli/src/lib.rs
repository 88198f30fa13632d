//! Commands behind the `maglev` binary.
//!
//! Every command that writes artifacts also writes the fully resolved
//! configuration next to them as `config.resolved.toml`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use maglev_core::config::{Config, ConfigError, REFERENCE_CONFIG};
use maglev_core::metrics::{format_sci, render_record, render_text, Report};
use maglev_core::sim::{self, csv_row, SimError};
use maglev_core::tuning::{self, TuningSpec};
use maglev_core::{Outcome, RunResult, PAIRS};

/// Exit status for a failed run.
pub const EXIT_RUN_FAILURE: u8 = 1;
/// Exit status for a bad config, tuning spec or command line.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit 2.
    Usage(String),
    /// The simulation or an output write failed: exit 1.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(_) => EXIT_RUN_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Run(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(format!("config error: {e}"))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}

/// Load the config at `path`, or the shipped reference when `None`. Keys
/// filled from defaults are reported on stderr.
pub fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    let Some(path) = path else {
        return Ok(Config::load(REFERENCE_CONFIG)?.config);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let loaded = Config::load(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if !loaded.defaulted.is_empty() {
        eprintln!("note: {} took defaults for: {}", path.display(), loaded.defaulted.join(", "));
    }
    Ok(loaded.config)
}

/// Per-run overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub scenario: String,
    pub no_pd: bool,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
}

/// Apply overrides to the config so that the written resolved config
/// reproduces the run exactly.
fn apply(config: &mut Config, opts: &RunOptions) -> Result<(), CliError> {
    let sc = config
        .scenarios
        .get_mut(&opts.scenario)
        .ok_or_else(|| CliError::Usage(format!("unknown scenario '{}'", opts.scenario)))?;
    if let Some(dt) = opts.dt {
        sc.dt = dt;
    }
    if let Some(d) = opts.duration {
        sc.duration = d;
    }
    if opts.no_pd {
        config.controller.pd_enabled = false;
    }
    config.validate()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_resolved(dir: &Path, config: &Config) -> Result<(), CliError> {
    write_text(&dir.join("config.resolved.toml"), &config.to_toml())
}

/// Trajectory, diagnostics and both report forms of one run. Returns the
/// text report.
fn write_run(dir: &Path, run: &RunResult) -> Result<String, CliError> {
    prepare_dir(dir)?;
    let path = dir.join("trajectory.csv");
    let mut out = create(&path)?;
    run.write_trajectory(&mut out).and_then(|_| out.flush()).map_err(|e| io_err(&path, e))?;
    let path = dir.join("diagnostics.csv");
    let mut out = create(&path)?;
    run.write_diagnostics(&mut out).and_then(|_| out.flush()).map_err(|e| io_err(&path, e))?;
    let report = Report::from_run(run);
    let text = render_text(&report);
    write_text(&dir.join("report.txt"), &text)?;
    write_text(&dir.join("report.kv"), &render_record(&report))?;
    Ok(text)
}

/// Run one scenario. `Ok(true)` iff the run stabilized.
pub fn cmd_run(config: Option<&Path>, opts: &RunOptions, out: &Path) -> Result<bool, CliError> {
    let mut config = load_config(config)?;
    apply(&mut config, opts)?;
    let stack = config.stack()?;
    prepare_dir(out)?;
    write_resolved(out, &config)?;
    let scenario = config.scenario(&opts.scenario)?;
    match sim::run(scenario, &stack, &config.plant()) {
        Ok(run) => {
            print!("{}", write_run(out, &run)?);
            Ok(run.outcome == Outcome::Stabilized)
        }
        Err(SimError::Diverged { t, source, partial }) => {
            write_run(out, &partial)?;
            Err(CliError::Run(format!("run failed at t = {t} s: {source}; partial results in {}", out.display())))
        }
        Err(e) => Err(CliError::Usage(e.to_string())),
    }
}

/// Summary of a PD on/off comparison.
pub fn comparison_summary(with_pd: &RunResult, without_pd: &RunResult) -> String {
    let on = with_pd.max_abs_level();
    let off = without_pd.max_abs_level();
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", with_pd.scenario);
    let _ = writeln!(s, "with PD leveler:    outcome {}, max |l| = {} m", with_pd.outcome, format_sci(on, 3));
    let _ = writeln!(s, "without PD leveler: outcome {}, max |l| = {} m", without_pd.outcome, format_sci(off, 3));
    let ratio = if on > 0.0 { format_sci(off / on, 3) } else { "inf".to_string() };
    let _ = writeln!(s, "max |l| ratio (without / with): {ratio}");
    s
}

/// Run a scenario with and without the leveler. Writes `pd_on/`, `pd_off/`
/// and `summary.txt`. `Ok(true)` iff both runs stabilized.
pub fn cmd_compare(config: Option<&Path>, opts: &RunOptions, out: &Path) -> Result<bool, CliError> {
    let mut config = load_config(config)?;
    apply(&mut config, &RunOptions { no_pd: false, ..opts.clone() })?;
    let stack = config.stack()?;
    prepare_dir(out)?;
    write_resolved(out, &config)?;
    let scenario = config.scenario(&opts.scenario)?;
    let (on, off) = match sim::run_pair_comparison(scenario, &stack, &config.plant()) {
        Ok(pair) => pair,
        Err(SimError::Diverged { t, source, partial }) => {
            let dir = out.join(if partial.pd_enabled { "pd_on" } else { "pd_off" });
            write_run(&dir, &partial)?;
            return Err(CliError::Run(format!("run failed at t = {t} s: {source}; partial results in {}", dir.display())));
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    write_run(&out.join("pd_on"), &on)?;
    write_run(&out.join("pd_off"), &off)?;
    let summary = comparison_summary(&on, &off);
    write_text(&out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(on.outcome == Outcome::Stabilized && off.outcome == Outcome::Stabilized)
}

/// Which controller a surface is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceId {
    Main(usize),
    Supervisor(usize),
}

impl SurfaceId {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("unknown controller '{s}'; expected flc1..flc4 or sflc1..sflc4"));
        let (kind, num): (fn(usize) -> SurfaceId, &str) = if let Some(n) = s.strip_prefix("sflc") {
            (SurfaceId::Supervisor, n)
        } else if let Some(n) = s.strip_prefix("flc") {
            (SurfaceId::Main, n)
        } else {
            return Err(bad());
        };
        match num.parse::<usize>() {
            Ok(k) if (1..=PAIRS).contains(&k) => Ok(kind(k - 1)),
            _ => Err(bad()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            SurfaceId::Main(k) => format!("flc{}", k + 1),
            SurfaceId::Supervisor(k) => format!("sflc{}", k + 1),
        }
    }
}

/// Control surface in physical units. Main controllers give `(e, de, u)`,
/// supervisors `(e, gain)`.
pub fn surface_rows(config: &Config, id: SurfaceId, grid: usize) -> Result<Vec<Vec<f64>>, CliError> {
    if grid < 2 {
        return Err(CliError::Usage(format!("--grid must be at least 2, got {grid}")));
    }
    let stack = config.stack()?;
    let rows = match id {
        SurfaceId::Main(k) => stack.main[k].surface(grid),
        SurfaceId::Supervisor(k) => stack.supervisor[k].surface(grid),
    };
    rows.map_err(|e| CliError::Usage(e.to_string()))
}

/// Write `surface_<id>.csv`. Returns its path.
pub fn cmd_surface(config: Option<&Path>, id: &str, grid: usize, out: &Path) -> Result<PathBuf, CliError> {
    let id = SurfaceId::parse(id)?;
    let config = load_config(config)?;
    let rows = surface_rows(&config, id, grid)?;
    prepare_dir(out)?;
    write_resolved(out, &config)?;
    let path = out.join(format!("surface_{}.csv", id.name()));
    let mut w = create(&path)?;
    let header = match id {
        SurfaceId::Main(_) => "in1,in2,out",
        SurfaceId::Supervisor(_) => "in1,out",
    };
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for r in &rows {
            writeln!(w, "{}", csv_row(r))?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Tune the config. Writes `tuned.config`, `tune_trace.csv` and the
/// resolved starting config.
pub fn cmd_tune(config: Option<&Path>, spec: &Path, out: &Path) -> Result<bool, CliError> {
    let start = load_config(config)?;
    let text = fs::read_to_string(spec)
        .map_err(|e| CliError::Usage(format!("cannot read tuning spec {}: {e}", spec.display())))?;
    let spec = TuningSpec::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", spec.display())))?;
    let result = tuning::tune(&start, &spec).map_err(|e| CliError::Usage(e.to_string()))?;
    prepare_dir(out)?;
    write_resolved(out, &start)?;
    write_text(&out.join("tuned.config"), &result.config.to_toml())?;
    let path = out.join("tune_trace.csv");
    let mut w = create(&path)?;
    tuning::write_trace(&result.names, &result.search.trace, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(&path, e))?;
    let first = result.search.trace.first().map_or(f64::NAN, |r| r.cost);
    println!("cost {} -> {}", format_sci(first, 3), format_sci(result.search.best_cost, 3));
    for (name, v) in result.names.iter().zip(&result.search.best) {
        println!("{name} = {v}");
    }
    Ok(true)
}
