use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsoc::elements::ElementPair;
use nsoc::experiments::{
    emit_report, run_control_study, run_derivative_checks, run_export_vtk, run_infsup_diagnostic, run_verify_state,
    ExperimentConfig, Format, Report,
};
use nsoc::optimize::Scheme;
use nsoc::Error;

/// Finite element experiments for pointwise-tracking control of the
/// stationary Navier-Stokes equations.
#[derive(Parser, Debug)]
#[command(name = "nsoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// State convergence against a manufactured flow.
    VerifyState(Common),
    /// Control, state and adjoint convergence against a fine-mesh reference.
    ControlStudy(Common),
    /// Gradient, second-order and transpose consistency checks.
    DerivativeChecks(Common),
    /// Discrete inf-sup constants on coarse meshes.
    Infsup(Common),
    /// Optimize on one mesh and write a VTK file.
    ExportVtk(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (reports go to stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    pair: Option<PairArg>,
    /// Comma-separated mesh levels, e.g. 8,16,32.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Fully,
    Semi,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PairArg {
    Th,
    Mini,
}

impl Common {
    fn load(&self) -> nsoc::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.scheme {
            cfg.scheme = match s {
                SchemeArg::Fully => Scheme::FullyDiscrete,
                SchemeArg::Semi => Scheme::Semidiscrete,
            };
        }
        if let Some(p) = self.pair {
            cfg.pair = match p {
                PairArg::Th => ElementPair::TaylorHood,
                PairArg::Mini => ElementPair::Mini,
            };
        }
        if let Some(l) = &self.levels {
            cfg.levels = Some(l.clone());
        }
        if let Some(o) = &self.out {
            cfg.output.path = Some(o.clone());
        }
        if let Some(f) = self.format {
            cfg.output.format = Some(match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn format_for(cfg: &ExperimentConfig) -> Format {
    cfg.output.format.unwrap_or_else(|| match cfg.output.path.as_deref().and_then(Path::extension) {
        Some(e) if e == "json" => Format::Json,
        _ => Format::Csv,
    })
}

fn finish(report: &dyn Report, cfg: &ExperimentConfig) -> nsoc::Result<bool> {
    let format = format_for(cfg);
    match &cfg.output.path {
        Some(p) => emit_report(report, format, p)?,
        None => match format {
            Format::Csv => print!("{}", report.to_csv()),
            Format::Json => println!("{}", report.to_json()?),
        },
    }
    eprint!("{}", report.summary());
    Ok(report.all_passed())
}

fn run(cmd: &Command) -> nsoc::Result<bool> {
    match cmd {
        Command::VerifyState(c) => {
            let cfg = c.load()?;
            finish(&run_verify_state(&cfg)?, &cfg)
        }
        Command::ControlStudy(c) => {
            let cfg = c.load()?;
            finish(&run_control_study(&cfg)?, &cfg)
        }
        Command::DerivativeChecks(c) => {
            let cfg = c.load()?;
            let pairs = match c.pair {
                Some(_) => vec![cfg.pair],
                None => vec![ElementPair::TaylorHood, ElementPair::Mini],
            };
            let schemes = match c.scheme {
                Some(_) => vec![cfg.scheme],
                None => vec![Scheme::FullyDiscrete, Scheme::Semidiscrete],
            };
            finish(&run_derivative_checks(&cfg, &pairs, &schemes)?, &cfg)
        }
        Command::Infsup(c) => {
            let cfg = c.load()?;
            finish(&run_infsup_diagnostic(&cfg)?, &cfg)
        }
        Command::ExportVtk(c) => {
            let mut cfg = c.load()?;
            let path = cfg.output.path.take().unwrap_or_else(|| PathBuf::from("nsoc.vtk"));
            let report = run_export_vtk(&cfg, &path)?;
            eprintln!("wrote {}", path.display());
            eprint!("{}", report.summary());
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
