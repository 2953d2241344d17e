use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use maglab::bulk;
use maglab::cli::{self, Check, ExperimentConfig};
use maglab::Result;

/// Magnetic-field averaging experiments.
#[derive(Debug, Parser)]
#[command(name = "maglab", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Grid spacing (overrides the config).
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Extra config overrides, `key=value`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Averaging inequality on random, constant or linear fields.
    Averaging,
    /// Lowest Dirichlet eigenvalue sweep over σ.
    Eig,
    /// Reduced GL energies and the g(b) table.
    BulkTable,
    /// Full GL minimization against the effective energy.
    Gl,
    /// Sample a seeded random field.
    FieldGen,
}

fn config(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| maglab::Error::Config { key: kv.clone(), reason: "expected KEY=VALUE".into() })?;
        cfg.set(k.trim(), v.trim());
    }
    if let Some(s) = args.seed {
        cfg.set("seed", &s.to_string());
    }
    if let Some(h) = args.h {
        cfg.set("h", &format!("{h:e}"));
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<Vec<Check>> {
    let cfg = config(args)?;
    let out = &args.out;
    std::fs::create_dir_all(out)?;
    match args.command {
        Command::Averaging => {
            let p = cli::AveragingParams::from_config(&cfg)?;
            let (rows, checks) = cli::run_averaging(&p)?;
            cli::write_rows(&out.join("averaging.csv"), &rows)?;
            Ok(checks)
        }
        Command::Eig => {
            let p = cli::EigParams::from_config(&cfg)?;
            let (rows, checks) = cli::run_eig(&p)?;
            cli::write_rows(&out.join("eig.csv"), &rows)?;
            cli::write_json(&out.join("eig.json"), &rows)?;
            Ok(checks)
        }
        Command::BulkTable => {
            let p = cli::BulkParams::from_config(&cfg)?;
            let (table, checks) = cli::run_bulk(&p)?;
            table.write_csv(&out.join("bulk.csv"))?;
            table.write_summary(&out.join("g_table.json"))?;
            Ok(checks)
        }
        Command::Gl => {
            let p = cli::GlParams::from_config(&cfg)?;
            let g = bulk::g_interpolant(&bulk::read_summary(&p.g_table)?)?;
            let (rows, checks) = cli::run_gl(&p, &g)?;
            cli::write_json(&out.join("gl.json"), &rows)?;
            Ok(checks)
        }
        Command::FieldGen => {
            let p = cli::FieldGenParams::from_config(&cfg)?;
            let (field, sample) = cli::run_field_gen(&p);
            maglab::io::write_scalar_csv(&out.join("field.csv"), &sample)?;
            cli::write_json(&out.join("field.json"), &field)?;
            Ok(Vec::new())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(cli::EXIT_ERROR as u8);
        }
    }
    match run(&args) {
        Ok(checks) => {
            for c in &checks {
                eprintln!("{c}");
            }
            ExitCode::from(cli::exit_code(&checks) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::EXIT_ERROR as u8)
        }
    }
}
