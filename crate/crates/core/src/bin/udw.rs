use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use udw::io::{
    figure_preset, fit_row, fit_to_bytes, kms_rows, kms_to_bytes, parse_config, render_table, run_sweep, ExperimentConfig, IoError,
    OutputFormat, Quantity,
};

/// Spatially extended Unruh–DeWitt detector rates.
#[derive(Parser, Debug)]
#[command(name = "udw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format: csv or json.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "UDW_WORKERS")]
    workers: Option<usize>,

    /// Quadrature tolerance (overrides the config's quad_tol).
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct Source {
    /// Experiment config file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in experiment (fig1..fig7, minkowski-packet, unruh-packet).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Frequency window on a k grid (default preset fig1).
    Window(Source),
    /// Vacuum transition rate on a Δ grid (default preset fig5).
    Rate(Source),
    /// Rate in a one-particle state (default preset unruh-packet).
    ParticleRate(Source),
    /// Detailed-balance ratios of an accelerated Δ sweep (default preset fig7).
    KmsCheck {
        #[command(flatten)]
        source: Source,
        /// Relative tolerance on each ratio.
        #[arg(long, default_value_t = 1e-9)]
        rel_tol: f64,
    },
    /// Double-Gaussian fit to a Hermite coupling.
    FitHermite {
        #[arg(long, default_value_t = 0)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// fig2 or fig3 selects the published coupling.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Data for one figure preset.
    Figure { id: String },
}

fn main() -> ExitCode {
    // Usage errors exit 1; 2 is reserved for unconverged points.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load(source: &Source, default_preset: &str) -> Result<(ExperimentConfig, bool), IoError> {
    match (&source.config, &source.preset) {
        (Some(path), _) => Ok((parse_config(&std::fs::read_to_string(path)?)?, false)),
        (None, Some(id)) => Ok((figure_preset(id)?, true)),
        (None, None) => Ok((figure_preset(default_preset)?, true)),
    }
}

fn expect_quantity(cfg: &ExperimentConfig, ok: impl Fn(Quantity) -> bool, command: &str) -> Result<(), IoError> {
    if cfg.series.iter().all(|s| ok(s.quantity)) {
        Ok(())
    } else {
        Err(IoError::Model(udw::Error::Inconsistent(format!(
            "`{command}` cannot run a config with quantity `{}`",
            cfg.quantity().name()
        ))))
    }
}

fn apply_overrides(cli: &Cli, cfg: &mut ExperimentConfig) -> Result<(), IoError> {
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            return Err(IoError::Model(udw::Error::InvalidParameter(format!("--tol must be positive, got {t}"))));
        }
        cfg.tolerances.quad_tol = t;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(p) = &cli.out {
        cfg.output.path = Some(p.clone());
    }
    Ok(())
}

fn emit(bytes: &[u8], path: Option<&PathBuf>) -> Result<(), IoError> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn sweep_and_emit(cli: &Cli, mut cfg: ExperimentConfig, from_preset: bool) -> Result<ExitCode, IoError> {
    apply_overrides(cli, &mut cfg)?;
    let table = run_sweep(&cfg, cli.workers)?;
    emit(&render_table(&table, cfg.output.format)?, cfg.output.path.as_ref())?;
    if from_preset {
        if let Some(recipe) = &cfg.recipe {
            let file = cfg.output.path.as_ref().map_or("-".to_string(), |p| p.display().to_string());
            eprintln!("plot: {}", recipe.replace("FILE", &file));
        }
    }
    for f in &table.failures {
        eprintln!("point failed: {f}");
    }
    Ok(if table.all_converged() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run(cli: &Cli) -> Result<ExitCode, IoError> {
    match &cli.command {
        Command::Window(src) => {
            let (cfg, preset) = load(src, "fig1")?;
            expect_quantity(&cfg, |q| q == Quantity::Window, "window")?;
            sweep_and_emit(cli, cfg, preset)
        }
        Command::Rate(src) => {
            let (cfg, preset) = load(src, "fig5")?;
            expect_quantity(&cfg, |q| matches!(q, Quantity::Rate { .. }), "rate")?;
            sweep_and_emit(cli, cfg, preset)
        }
        Command::ParticleRate(src) => {
            let (cfg, preset) = load(src, "unruh-packet")?;
            expect_quantity(&cfg, |q| q == Quantity::ParticleRate, "particle-rate")?;
            sweep_and_emit(cli, cfg, preset)
        }
        Command::Figure { id } => {
            let cfg = figure_preset(id)?;
            sweep_and_emit(cli, cfg, true)
        }
        Command::KmsCheck { source, rel_tol } => {
            let (mut cfg, _) = load(source, "fig7")?;
            expect_quantity(&cfg, |q| matches!(q, Quantity::Rate { .. }), "kms-check")?;
            apply_overrides(cli, &mut cfg)?;
            let table = run_sweep(&cfg, cli.workers)?;
            let rows = kms_rows(&cfg, &table, *rel_tol)?;
            emit(&kms_to_bytes(&rows, cfg.series.len() > 1, cfg.output.format)?, cfg.output.path.as_ref())?;
            let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
            eprintln!("kms-check: {} pairs, worst relative error {worst:e}", rows.len());
            let ok = !rows.is_empty() && rows.iter().all(|r| r.pass) && table.all_converged();
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::FitHermite { n, m, preset } => {
            let (n, m) = match preset.as_deref() {
                None => (*n, *m),
                Some("fig2") => (0, 1),
                Some("fig3") => (0, 3),
                Some(other) => return Err(IoError::UnknownPreset(format!("{other} (fit-hermite takes fig2 or fig3)"))),
            };
            let row = fit_row(n, m)?;
            emit(&fit_to_bytes(&row, cli.format.unwrap_or_default())?, cli.out.as_ref())?;
            Ok(if row.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}
