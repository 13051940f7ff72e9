use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use imexdg_bench::case::{parse_mass_inverse, parse_preconditioner, Case, RunConfig};
use imexdg_bench::report::{profile_report, scaling_csv, scaling_sweep};
use imexdg_bench::run::run_case;

/// Runs one benchmark case of the IMEX-DG solver.
#[derive(Debug, Parser)]
#[command(name = "imexdg-bench", version)]
struct Cli {
    #[arg(long)]
    case: Case,
    #[arg(long)]
    degree: Option<usize>,
    /// Cell counts, e.g. `30,8` or `30,20,8`.
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
    #[arg(long)]
    dt: Option<f64>,
    /// Final time in seconds.
    #[arg(long)]
    tf: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "helmholtz", value_parser = parse_preconditioner)]
    preconditioner: imexdg_core::helmholtz::PreconditionerKind,
    #[arg(long, default_value = "fast", value_parser = parse_mass_inverse)]
    mass_inverse: imexdg_core::state::IntegrationMode,
    #[arg(long, default_value = "ars222")]
    tableau: String,
    /// Use fixed-order reductions so results do not depend on the thread count.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print outer and GMRES iteration counts of every stage.
    #[arg(long)]
    verbose_solver: bool,
    /// Also run a strong-scaling sweep over these thread counts.
    #[arg(long, value_delimiter = ',')]
    scaling: Option<Vec<usize>>,
}

fn config(cli: &Cli) -> RunConfig {
    let mut cfg = RunConfig::for_case(cli.case);
    if let Some(r) = cli.degree {
        cfg.degree = r;
    }
    if let Some(c) = &cli.cells {
        cfg.cells = c.clone();
    }
    if let Some(dt) = cli.dt {
        cfg.dt = dt;
    }
    if let Some(tf) = cli.tf {
        cfg.t_final = tf;
    }
    cfg.threads = cli.threads;
    cfg.preconditioner = cli.preconditioner;
    cfg.mass_inverse = cli.mass_inverse;
    cfg.tableau = cli.tableau.clone();
    cfg.deterministic = cli.deterministic;
    cfg.output_dir = cli.output.clone();
    cfg.seed = cli.seed;
    cfg.verbose_solver = cli.verbose_solver;
    cfg
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli);
    cfg.validate()?;
    let out = run_case(&cfg)?;
    let (csv, table) = profile_report(&[(cfg.case.name().to_string(), out.blocks)]);
    if let Some(dir) = &cfg.output_dir {
        std::fs::write(dir.join("profile.csv"), csv)?;
        std::fs::write(dir.join("profile.txt"), &table)?;
    }
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    eprint!("{table}");
    if let Some(list) = &cli.scaling {
        let points = scaling_sweep(&cfg, list)?;
        let csv = scaling_csv(cfg.case.name(), &points);
        match &cfg.output_dir {
            Some(dir) => std::fs::write(dir.join("scaling.csv"), csv)?,
            None => print!("{csv}"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
