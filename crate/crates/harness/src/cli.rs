//! Command-line interface of the `purity` binary.
//!
//! Flags mirror the configuration keys. Precedence: built-in defaults, then
//! the `--config` file, then flags.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use purity_core::semiclassics::{
    averaged_coupling, phase_space_purity_mc, purity_prediction, PacketSpec,
};

use crate::config::{ExperimentConfig, MethodChoice, ModelChoice, ResolvedConfig, Spacing};
use crate::emit::{analyze_directory, emit_record, format_value, summary_csv, write_summary};
use crate::error::{HarnessError, HarnessResult};
use crate::experiment::{build_model, cell_label, run_sweep_with, semiclassical_u, Channels, RunRecord};

#[derive(Debug, Parser)]
#[command(name = "purity", version, about = "Purity decay of weakly coupled integrable oscillators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single (hbar, delta) cell.
    Run(ExperimentArgs),
    /// Run every hbar × delta cell in parallel.
    Sweep(ExperimentArgs),
    /// Semiclassical prediction only, no quantum evolution.
    Predict(ExperimentArgs),
    /// Summarize emitted run directories.
    Analyze(AnalyzeArgs),
    /// Compare the phase-space Monte-Carlo integral with the determinant formula.
    McOracle(McArgs),
}

#[derive(Debug, Args, Default)]
pub struct ExperimentArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<ModelChoice>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub offset: Option<f64>,
    #[arg(long)]
    pub j_star: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub hbar_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub delta_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub mode_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub quad_points: Option<usize>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long)]
    pub scaled_t_max: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    #[arg(long)]
    pub log_start: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    #[arg(long)]
    pub krylov_dim: Option<usize>,
    #[arg(long)]
    pub target_error: Option<f64>,
    #[arg(long)]
    pub step_phase: Option<f64>,
    #[arg(long)]
    pub step_dt: Option<f64>,
    #[arg(long)]
    pub quantum: Option<bool>,
    #[arg(long)]
    pub echo: Option<bool>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output root; defaults to $PURITY_OUTPUT_ROOT, then ./purity-out.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    #[arg(long)]
    pub gnuplot: Option<bool>,
    #[arg(long)]
    pub plateau_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory holding `<label>/data.csv` run outputs.
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub plateau_fraction: f64,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Scaled times δt at which to compare.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub delta_t: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

impl ExperimentArgs {
    /// Defaults, then the config file, then flags.
    pub fn to_config(&self) -> HarnessResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let m = &mut c.model;
        if let Some(v) = self.kind {
            m.kind = v;
        }
        if let Some(v) = &self.gammas {
            let [g1, g2] = v[..] else {
                return Err(HarnessError::Config(format!("--gammas needs two values, got {}", v.len())));
            };
            m.gammas = Some([g1, g2]);
        }
        set(&mut m.offset, self.offset);
        set(&mut m.j_star, self.j_star);
        set(&mut m.hbar_list, self.hbar_list.clone());
        set(&mut m.delta_list, self.delta_list.clone());
        set(&mut m.mode_dims, self.mode_dims.clone());
        set(&mut m.quad_points, self.quad_points);
        set(&mut m.fd_step, self.fd_step);
        let g = &mut c.grid;
        assign(&mut g.scaled_t_max, self.scaled_t_max);
        assign(&mut g.samples, self.samples);
        assign(&mut g.spacing, self.spacing);
        assign(&mut g.log_start, self.log_start);
        let p = &mut c.propagation;
        assign(&mut p.method, self.method);
        assign(&mut p.krylov_dim, self.krylov_dim);
        assign(&mut p.target_error, self.target_error);
        assign(&mut p.step_phase, self.step_phase);
        set(&mut p.step_dt, self.step_dt);
        assign(&mut p.quantum, self.quantum);
        assign(&mut p.echo, self.echo);
        assign(&mut p.jobs, self.jobs);
        let o = &mut c.output;
        set(&mut o.dir, self.dir.clone());
        assign(&mut o.gnuplot, self.gnuplot);
        assign(&mut o.plateau_fraction, self.plateau_fraction);
        Ok(c)
    }

    pub fn resolve(&self) -> HarnessResult<ResolvedConfig> {
        self.to_config()?.resolve()
    }
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn assign<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn report(record: &RunRecord, dir: &Path) {
    let s = &record.summary;
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!(
        "{}: slope_q={} slope_sc={} plateau={} max_dev={} ({:.2}s) -> {}",
        record.label,
        opt(s.slope_quantum),
        opt(s.slope_semiclassical),
        opt(s.plateau_mean),
        opt(s.max_rel_dev),
        record.timing.total_seconds,
        dir.display()
    );
}

/// Runs all cells, emits the successful ones and maps failures to the
/// sweep exit semantics.
fn run_cells(cfg: &ResolvedConfig, channels: Channels) -> HarnessResult<()> {
    let outcomes = run_sweep_with(cfg, channels, cfg.propagation.jobs);
    let total = outcomes.len();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o.result.and_then(|rec| {
            let dir = emit_record(&rec, cfg, &cfg.output_dir)?;
            report(&rec, &dir);
            Ok(rec.summary)
        }) {
            Ok(s) => summaries.push(s),
            Err(e) => {
                error!("{}: {e}", cell_label(cfg.model, o.hbar, o.delta));
                failures.push(e);
            }
        }
    }
    if !summaries.is_empty() {
        let path = write_summary(&summaries, &cfg.output_dir)?;
        info!("summary written to {}", path.display());
    }
    match failures.len() {
        0 => Ok(()),
        n if n == total => Err(failures.pop().expect("at least one failure")),
        n => Err(HarnessError::PartialSweep { failed: n, total }),
    }
}

fn mc_oracle(args: &McArgs) -> HarnessResult<()> {
    let cfg = args.experiment.resolve()?;
    let mut text = String::from("hbar,delta,delta_t,I_mc,stderr,I_semiclassical,z\n");
    for (hbar, delta) in cfg.cells() {
        if delta <= 0.0 {
            return Err(HarnessError::Config("mc-oracle needs delta > 0".into()));
        }
        let label = cell_label(cfg.model, hbar, delta);
        let numerical = |source| HarnessError::Numerical {
            cell: label.clone(),
            source,
        };
        let model = build_model(&cfg, hbar, delta).map_err(numerical)?;
        let (u, _) = semiclassical_u(&model, &cfg).map_err(numerical)?;
        let vbar = averaged_coupling(&model.classical_coupling, cfg.quad_points);
        let packet =
            PacketSpec::coherent(vec![cfg.j_star; model.space.n_modes()], model.d_a).map_err(numerical)?;
        for &x in &args.delta_t {
            let t = x / delta;
            let est = phase_space_purity_mc(&vbar, &packet, hbar, delta, t, args.mc_samples, args.seed)
                .map_err(numerical)?;
            let pred = purity_prediction(&u, delta, t);
            let z = (est.mean - pred) / est.stderr;
            println!(
                "{label} delta_t={x}: mc={:.6} ± {:.2e}  prediction={pred:.6}  z={z:+.2}",
                est.mean, est.stderr
            );
            let row = [hbar, delta, x, est.mean, est.stderr, pred, z].map(format_value);
            text.push_str(&row.join(","));
            text.push('\n');
        }
    }
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| HarnessError::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("mc_oracle.csv");
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}

pub fn execute(cli: &Cli) -> HarnessResult<()> {
    match &cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            if cfg.cells().len() != 1 {
                return Err(HarnessError::Config(
                    "run takes a single hbar and delta; use sweep for lists".into(),
                ));
            }
            run_cells(&cfg, Channels::from_config(&cfg))
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            run_cells(&cfg, Channels::from_config(&cfg))
        }
        Command::Predict(args) => {
            let cfg = args.resolve()?;
            run_cells(&cfg, Channels::semiclassical_only())
        }
        Command::Analyze(args) => {
            if !(args.plateau_fraction > 0.0 && args.plateau_fraction <= 1.0) {
                return Err(HarnessError::Config("plateau_fraction must lie in (0, 1]".into()));
            }
            let rows = analyze_directory(&args.input, args.plateau_fraction)?;
            if rows.is_empty() {
                return Err(HarnessError::Config(format!(
                    "no run directories found under {}",
                    args.input.display()
                )));
            }
            print!("{}", summary_csv(&rows));
            write_summary(&rows, &args.input).map(|_| ())
        }
        Command::McOracle(args) => mc_oracle(args),
    }
}

/// Parses `argv` and returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
