use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rsopt::bench::{self, check_accounting, export, run_panel, summary_table, write_trajectory_csv};
use rsopt::config::RunConfig;
use rsopt::optim::{run, Termination};
use rsopt::special::{effective_rank, ell, mu, tau, SmoothnessSummary};
use rsopt::verify::{self, CheckName, VerifyReport};
use rsopt::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

/// Randomized-subspace stochastic optimization toolkit.
#[derive(Parser, Debug)]
#[command(name = "rsopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print tau, mu and (given a smoothness summary) r_eff and ell.
    Constants(ConstantsArgs),
    /// Monte-Carlo checks of the Haar frame identities.
    Verify(VerifyArgs),
    /// Run one configuration and write its trajectory.
    Run(ConfigArgs),
    /// Tune, evaluate, aggregate and plot the benchmark.
    Bench(ConfigArgs),
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    r: usize,
    /// Trace of the smoothness matrix.
    #[arg(long, requires = "opnorm")]
    trace: Option<f64>,
    /// Spectral norm of the smoothness matrix.
    #[arg(long, requires = "trace")]
    opnorm: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Ambient dimensions (default 2,10,100,1000).
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    /// Subspace dimensions (default 1, ceil(d/10), ceil(d/2), d per d).
    #[arg(long, value_delimiter = ',')]
    r: Vec<usize>,
    /// Samples per check.
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the reports as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Path to the JSON run config.
    config: PathBuf,
}

/// `x` with 12 significant digits, trailing zeros trimmed.
fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..=11).contains(&mag) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Domain { .. } | Error::Parse(_) | Error::Io { .. } => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_for(&e))
}

fn cmd_constants(a: &ConstantsArgs) -> Result<(), Error> {
    let t = tau(a.d, a.r)?;
    let m = mu(a.d, a.r)?;
    println!("tau   = {}", sig12(t));
    println!("mu    = {}", sig12(m));
    if let (Some(trace), Some(op)) = (a.trace, a.opnorm) {
        let s = SmoothnessSummary::new(trace, op)?;
        let re = effective_rank(&s)?;
        println!("r_eff = {}", sig12(re));
        println!("ell   = {}", sig12(ell(a.d, a.r, re)?));
    } else if a.r == a.d {
        println!("ell   = 1");
    }
    Ok(())
}

fn verify_grid(a: &VerifyArgs) -> Result<Vec<(usize, usize)>, Error> {
    let ds = if a.d.is_empty() { verify::DEFAULT_DIMS.to_vec() } else { a.d.clone() };
    if a.r.is_empty() {
        return Ok(verify::default_grid(&ds));
    }
    let mut grid = Vec::new();
    for &d in &ds {
        for &r in &a.r {
            if r < 1 || r > d {
                return Err(Error::Parse(format!("--r {r} is not in 1..={d} for --d {d}")));
            }
            grid.push((d, r));
        }
    }
    Ok(grid)
}

fn print_report(rep: &VerifyReport) {
    let status = if rep.pass { "PASS" } else { "FAIL" };
    let detail = if rep.trivial {
        "deterministic at r = d".to_string()
    } else if rep.name == CheckName::Beta {
        format!("ks {:.3e} <= {:.3e}", rep.stderr_or_ks, rep.threshold)
    } else {
        format!(
            "|{:.6} - {:.6}| <= 4 x {:.3e}",
            rep.empirical, rep.analytic, rep.stderr_or_ks
        )
    };
    println!("{status} {:<9} d={:<5} r={:<5} {detail}", rep.name.as_str(), rep.d, rep.r);
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool, Error> {
    if a.n < verify::MIN_SAMPLES_DIST {
        return Err(Error::Parse(format!("--n must be at least {}", verify::MIN_SAMPLES_DIST)));
    }
    let grid = verify_grid(a)?;
    let mut reports = Vec::new();
    for (d, r) in grid {
        for rep in verify::verify_point(d, r, a.n, a.seed)? {
            print_report(&rep);
            reports.push(rep);
        }
    }
    if let Some(path) = &a.csv {
        let f = fs::File::create(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        verify::write_reports_csv(BufWriter::new(f), &reports)?;
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} checks, {failed} failed", reports.len());
    Ok(failed == 0)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn cmd_run(a: &ConfigArgs) -> Result<u8, Error> {
    let cfg = RunConfig::from_path(&a.config)?;
    let problem = cfg.problem()?;
    let method = cfg.method_config()?;
    let rec = run(&problem, &cfg.noise(), &method)?;
    create_dir(&cfg.output.dir)?;
    let path = cfg.output.dir.join("trajectory.csv");
    let f = fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    write_trajectory_csv(BufWriter::new(f), &rec)?;
    let last = rec.last();
    println!("wrote {}", path.display());
    match rec.termination {
        Termination::Diverged { iteration } => {
            eprintln!(
                "diverged at iteration {iteration}; last finite point: k={} oracle_calls={} grad_norm={}",
                last.k, last.oracle_calls, last.grad_norm
            );
            Ok(EXIT_DIVERGED)
        }
        _ => {
            println!("oracle_calls={} grad_norm={}", last.oracle_calls, last.grad_norm);
            Ok(0)
        }
    }
}

fn cmd_bench(a: &ConfigArgs) -> Result<u8, Error> {
    let cfg = RunConfig::from_path(&a.config)?;
    let spec = cfg.experiment()?;
    let dir = &cfg.output.dir;
    create_dir(dir)?;
    let mut panels = Vec::new();
    for &rho in &spec.rhos {
        let panel = run_panel(&spec, rho)?;
        check_accounting(&spec, &panel)?;
        let curves: Vec<_> = panel.results.iter().map(|r| r.curve.clone()).collect();
        let stem = format!("curves_d{}_rho{}", spec.d, rho);
        let title = format!("d = {}, rho = {}", spec.d, rho);
        let files = export(&curves, dir, &stem, &title)?;
        println!("wrote {}", files.csv.display());
        if let Some(svg) = files.svg {
            println!("wrote {}", svg.display());
        }
        for res in &panel.results {
            let diverged = res.records.iter().filter(|r| r.diverged()).count();
            println!(
                "rho={rho} {:<16} eta_bar={:.0e} final mean grad_norm={:.4e}{}",
                res.label,
                res.tuned.eta_bar,
                bench::mean_final_grad_norm(&res.records),
                if diverged > 0 { format!(" ({diverged} seeds diverged)") } else { String::new() }
            );
        }
        panels.push(panel);
    }
    let table = summary_table(spec.d, &panels);
    let path = dir.join("summary.txt");
    fs::write(&path, &table).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    println!("\n{table}");
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Constants(a) => match cmd_constants(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Command::Verify(a) => match cmd_verify(a) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(EXIT_FAIL),
            Err(e) => fail(e),
        },
        Command::Run(a) => match cmd_run(a) {
            Ok(code) => ExitCode::from(code),
            Err(e) => fail(e),
        },
        Command::Bench(a) => match cmd_bench(a) {
            Ok(code) => ExitCode::from(code),
            Err(e) => fail(e),
        },
    }
}
