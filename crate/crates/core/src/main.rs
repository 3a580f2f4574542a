#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use heisgame::cli::{self, Scenario, DEFAULT_MAX_VALUES};
use heisgame::flow::{integrate_sampled, PiecewiseConstantControl, PlaneVector, SignConvention};
use heisgame::{Error, HPoint, Result};

#[derive(Parser, Debug)]
#[command(name = "heisgame", version, about = "Differential games and Hamilton-Jacobi equations on the Heisenberg group")]
struct Args {
    /// Output directory (default: the scenario's `outputs`, else ./heisgame-out).
    #[arg(long, global = true, env = "HEISGAME_OUT")]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a scenario and write value grids, manifest and log.
    Solve {
        scenario: PathBuf,
        /// Also write one CSV per slice.
        #[arg(long)]
        csv: bool,
    },
    /// Run every check on a scenario; exit 1 if any fails.
    Verify { scenario: PathBuf },
    /// Refinement study over several levels.
    Converge {
        scenario: PathBuf,
        #[arg(long)]
        levels: usize,
        /// Largest number of stored nodal values (nodes times slices) per level.
        #[arg(long, default_value_t = DEFAULT_MAX_VALUES)]
        max_nodes: usize,
    },
    /// Re-run the Lipschitz audit on a directory written by `solve`.
    Audit { dir: PathBuf },
    /// Print a horizontal curve under a piecewise-constant control as CSV.
    Trajectory {
        /// Start point `x1,x2,x3`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        start: HPoint,
        /// Segment length.
        #[arg(long)]
        dt: f64,
        /// Segment value `z1,z2`; repeat once per segment.
        #[arg(long = "control", value_parser = parse_vector, allow_hyphen_values = true)]
        controls: Vec<PlaneVector>,
        /// Extra samples inside each segment.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = Sign::Plus)]
        sign: Sign,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sign {
    Plus,
    Minus,
}

fn parse_floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_point(s: &str) -> std::result::Result<HPoint, String> {
    let v = parse_floats(s, 3)?;
    Ok(HPoint::new(v[0], v[1], v[2]))
}

fn parse_vector(s: &str) -> std::result::Result<PlaneVector, String> {
    let v = parse_floats(s, 2)?;
    Ok(PlaneVector::new(v[0], v[1]))
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario> {
    let mut sc = Scenario::load(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    Ok(sc)
}

fn out_dir(flag: &Option<PathBuf>, sc: &Scenario) -> PathBuf {
    flag.clone()
        .or_else(|| sc.outputs.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("heisgame-out"))
}

fn run(args: &Args) -> Result<u8> {
    match &args.command {
        Command::Solve { scenario, csv } => {
            let sc = load(scenario, args.seed)?;
            let out = out_dir(&args.out, &sc);
            let s = cli::run_solve(&sc, &out, *csv)?;
            for c in &s.manifest.constants {
                println!("{:<22} {:>14.6} = {}", c.name, c.value, c.formula);
            }
            println!("{} trusted nodes at t = 0; output in {}", s.manifest.trusted_nodes_initial, out.display());
            Ok(0)
        }
        Command::Verify { scenario } => {
            let sc = load(scenario, args.seed)?;
            let out = out_dir(&args.out, &sc);
            let b = cli::run_verify(&sc, &out)?;
            for c in &b.checks {
                let status = match (c.passed, c.informational) {
                    (true, _) => "PASS",
                    (false, true) => "NOTE",
                    (false, false) => "FAIL",
                };
                println!("{status} {:<24} measured {:>12.4e}  threshold {:>12.4e}  {}", c.name, c.measured, c.constant, c.detail);
            }
            if b.passed {
                Ok(0)
            } else {
                let names: Vec<&str> = b.failures().iter().map(|c| c.name.as_str()).collect();
                eprintln!("failing checks: {}", names.join(", "));
                Ok(1)
            }
        }
        Command::Converge { scenario, levels, max_nodes } => {
            let sc = load(scenario, args.seed)?;
            let out = out_dir(&args.out, &sc);
            let rows = cli::run_converge(&sc, *levels, *max_nodes, &out)?;
            print!("{}", cli::converge::rows_to_csv(&rows));
            Ok(0)
        }
        Command::Audit { dir } => {
            let a = cli::run_audit(dir)?;
            for r in [&a.lipschitz.spatial, &a.lipschitz.space_time] {
                println!(
                    "{} {}: worst {:.6} vs constant {:.6} (slack {})",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.quantity,
                    r.worst_ratio,
                    r.constant,
                    r.slack
                );
            }
            if let Some(ok) = a.initial_matches_datum {
                println!("{} initial slice equals g", if ok { "PASS" } else { "FAIL" });
            }
            Ok(if a.passed { 0 } else { 1 })
        }
        Command::Trajectory { start, dt, controls, samples, sign } => {
            if !(*dt > 0.0) {
                return Err(Error::MalformedControl(format!("segment length {dt} must be positive")));
            }
            let u = PiecewiseConstantControl::uniform(0.0, *dt, controls.clone())?;
            let sign = match sign {
                Sign::Plus => SignConvention::Plus,
                Sign::Minus => SignConvention::Minus,
            };
            print!("{}", integrate_sampled(start, &u, sign, *samples).to_csv());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global() {
        eprintln!("warning: thread pool: {e}");
    }
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
