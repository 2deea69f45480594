use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use wmfs::assembly::{BoundarySystem, MatrixFormat};
use wmfs::data::ProblemData;
use wmfs::experiment::{assemble_config, build_sources, run, verify_config, ExperimentConfig};
use wmfs::solver::min_norm_solve;
use wmfs::wavelets::normalize;

#[derive(Parser)]
#[command(
    name = "wmfs",
    version,
    about = "Wavelet source solver for interior Neumann Laplace problems"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured source points to `sources.csv`.
    Sources {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble the boundary system and dump it with a manifest.
    Assemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Binary)]
        format: Format,
    },
    /// Min-norm solve of a dumped system; writes `expansion.json`.
    Solve {
        /// Manifest file or the directory holding it.
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured sweep and write the records.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo check that the source discs cover the exterior band.
    VerifyCover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Binary,
    Csv,
}

impl From<Format> for MatrixFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Binary => MatrixFormat::Binary,
            Format::Csv => MatrixFormat::Csv,
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

/// Returns whether every piece of work succeeded.
fn execute(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Sources { config, out } => {
            let cfg = load_config(&config)?;
            let curve = cfg.curve.build()?;
            let data = ProblemData::from_spec(&cfg.data, &curve)?;
            let set = build_sources(&cfg.sources, &curve, cfg.eps, &data)?;
            std::fs::create_dir_all(&out)?;
            set.write_csv(BufWriter::new(File::create(out.join("sources.csv"))?))?;
            println!("{} sources", set.len());
            Ok(true)
        }
        Command::Assemble {
            config,
            out,
            format,
        } => {
            let cfg = load_config(&config)?;
            let curve = cfg.curve.build()?;
            let data = ProblemData::from_spec(&cfg.data, &curve)?;
            let family = normalize(
                build_sources(&cfg.sources, &curve, cfg.eps, &data)?,
                &curve,
                cfg.order,
            )?;
            let system = assemble_config(&cfg, &curve, &data, &family)?;
            system.dump(&out, &curve, cfg.m0, &cfg.data.label(), format.into())?;
            println!("{} x {} system", system.rows(), system.cols());
            Ok(true)
        }
        Command::Solve { system, out } => {
            let (system, manifest) = BoundarySystem::load(&system)?;
            let (expansion, diagnostics) = min_norm_solve(&system)?;
            std::fs::create_dir_all(&out)?;
            write_json(
                &out.join("expansion.json"),
                &json!({ "family": system.family, "expansion": expansion }),
            )?;
            write_json(&out.join("diagnostics.json"), &diagnostics)?;
            println!(
                "{}: residual {:.3e}, |d| {:.3e}, rank {}/{}",
                manifest.data,
                expansion.residual_norm,
                expansion.coeff_norm,
                diagnostics.rank_estimate,
                system.cols()
            );
            Ok(true)
        }
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let records = run(&cfg, Some(&out))?;
            let mut ok = true;
            for r in &records {
                match &r.error {
                    None => println!(
                        "[{}] s_N {} M {}: linf {} |d| {:.3e} ({:.2}s)",
                        r.index,
                        r.sources,
                        r.rows,
                        r.linf_error.map_or("-".into(), |e| format!("{e:.3e}")),
                        r.coeff_norm.unwrap_or(f64::NAN),
                        r.wall_time
                    ),
                    Some(e) => {
                        ok = false;
                        eprintln!("[{}] failed: {e}", r.index);
                    }
                }
            }
            Ok(ok)
        }
        Command::VerifyCover { config, out } => {
            let cfg = load_config(&config)?;
            let report = verify_config(&cfg)?;
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                write_json(&out.join("cover.json"), &report)?;
            }
            println!(
                "{} samples, {} uncovered, covering constant {}",
                report.sample_count, report.uncovered_count, report.covering_constant_estimate
            );
            Ok(report.covered)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
