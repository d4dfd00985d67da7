use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use quenchlab::config::Scenario;
use quenchlab::gridfile;
use quenchlab::lab::{prepare, verify, Check, LabError};
use quenchlab::output::{bounds_json, bounds_text, num, summary_json, write_run};
use quenchlab::sweep::{run_sweep, table_csv, threads_from_env};
use quenchlab_core::spectrum::{first_eigenpair, sobolev_constant, verify_positivity, EIGEN_TOL};
use quenchlab_core::Discretization;

#[derive(Parser)]
#[command(
    name = "quenchlab",
    version,
    about = "Blow-up time bounds for coupled fourth-order parabolic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// First clamped-plate eigenpair of the configured domain.
    Eig {
        config: PathBuf,
        /// Write φ₁ as a grid file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Embedding constants for the given exponents.
    Sobolev {
        config: PathBuf,
        #[arg(long = "r", value_delimiter = ',', required = true)]
        r: Vec<f64>,
    },
    /// Run the evolution and write trajectory outputs.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Lower and upper bounds for the configured initial data.
    Bounds {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Simulate and check the bounds against the observed blow-up time.
    Verify {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the `[sweep]` grid and write a summary table.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-row outputs.
        #[arg(long)]
        rows: bool,
    },
}

fn load(path: &Path) -> Result<Scenario, LabError> {
    Ok(Scenario::load(path)?)
}

fn cmd_eig(config: &Path, out: Option<&Path>) -> Result<u8, LabError> {
    let s = load(config)?;
    let disc = Discretization::new(&s.domain)?;
    let eig = first_eigenpair(&disc.bilaplacian, EIGEN_TOL)?;
    let pos = verify_positivity(&eig, &disc.grid);
    println!("lambda1     {}", num(eig.lambda1));
    println!("residual    {}", num(eig.residual));
    println!("iterations  {}", eig.iterations);
    println!("unknowns    {}", disc.grid.unknown_count());
    let status = if pos.informational {
        "informational"
    } else if pos.pass {
        "pass"
    } else {
        "fail"
    };
    println!("phi1_min    {} ({status})", num(pos.min_value));
    if let Some(path) = out {
        let field = eig.field(&disc.grid)?;
        gridfile::save(path, &field.values)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_sobolev(config: &Path, rs: &[f64]) -> Result<u8, LabError> {
    let s = load(config)?;
    let disc = Discretization::new(&s.domain)?;
    let eig = first_eigenpair(&disc.bilaplacian, EIGEN_TOL)?;
    println!(
        "{:>8}  {:>14}  {:>14}  {:<18}  {:<9}  range",
        "r", "S", "ratio", "method", "converged"
    );
    for &r in rs {
        let e = sobolev_constant(&disc, &eig, r)?;
        println!(
            "{:>8}  {:>14}  {:>14}  {:<18}  {:<9}  {:?}",
            r,
            num(e.s),
            num(e.ratio),
            format!("{:?}", e.method),
            e.converged,
            e.range
        );
    }
    Ok(0)
}

fn cmd_simulate(config: &Path, out: &Path, check: bool) -> Result<u8, LabError> {
    let s = load(config)?;
    let prep = prepare(&s)?;
    let sim = prep.simulate()?;
    let ver = verify(&prep, &sim);
    let dir = write_run(out, &prep, &sim, &ver)?;
    let last = sim.traj.last();
    println!("verdict   {}", sim.traj.verdict.as_str());
    println!(
        "reached   {}  ({} steps)",
        num(last.t),
        sim.traj.samples.len() - 1
    );
    if let Some(e) = &sim.tstar {
        println!(
            "tstar     {}  [{}, {}]",
            num(e.tstar),
            num(e.low),
            num(e.high)
        );
    }
    if !check {
        println!("wrote {}", dir.display());
        return Ok(0);
    }
    let v = summary_json(&prep, &sim, &ver);
    let b = &v["bounds"];
    for key in ["T", "T0", "Tbar"] {
        println!("{key:<9} {}", b[key]);
    }
    for (name, c) in ver.entries() {
        println!("{name:<14} {}", c.as_str());
    }
    for n in &ver.notes {
        println!("note: {n}");
    }
    println!("wrote {}", dir.display());
    Ok(if ver.sandwich == Check::Fail { 3 } else { 0 })
}

fn cmd_bounds(config: &Path, json: bool) -> Result<u8, LabError> {
    let s = load(config)?;
    let prep = prepare(&s)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&bounds_json(&prep)).expect("serializable")
        );
    } else {
        print!("{}", bounds_text(&prep));
    }
    Ok(0)
}

fn cmd_sweep(config: &Path, out: &Path, rows: bool) -> Result<u8, LabError> {
    let s = load(config)?;
    let threads = threads_from_env()?;
    let result = run_sweep(&s, threads, rows.then_some(out))?;
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("{}-sweep.csv", s.name));
    std::fs::write(&path, table_csv(&s, &result))?;
    let failed = result.iter().filter(|r| r.outcome.is_err()).count();
    println!(
        "{} rows ({} failed), wrote {}",
        result.len(),
        failed,
        path.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Eig { config, out } => cmd_eig(config, out.as_deref()),
        Command::Sobolev { config, r } => cmd_sobolev(config, r),
        Command::Simulate { config, out } => cmd_simulate(config, out, false),
        Command::Bounds { config, json } => cmd_bounds(config, *json),
        Command::Verify { config, out } => cmd_simulate(config, out, true),
        Command::Sweep { config, out, rows } => cmd_sweep(config, out, *rows),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
