mod render;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use roe_core::planner::{maneuvers_from_records, Maneuver, PlanRecord};
use roe_core::reachset::{sample_points, write_points_csv, Plane};
use roe_core::scenario::ErrorModelFile;
use roe_core::{ConvexHull2D, Fault, Scenario, ScenarioConfig};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "roeplan", version, about = "Impulsive ROE reconfiguration planning for eccentric orbits")]
struct Cli {
    /// Scenario file (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write outputs into this directory instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Monte-Carlo seed (overrides options.error.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; never changes numeric output
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-plane minimum delta-v and dominance assessment
    Dvmin,
    /// All candidate maneuver plans
    Plan,
    /// Sampled reachable set and its convex hull
    Reachset {
        #[arg(long, default_value = "de_tilde")]
        plane: String,
        /// Delta-v budget scaling the set [m/s]
        #[arg(long, default_value_t = 1.0)]
        cost: f64,
        /// Epoch samples over the window (default from the scenario)
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Propagate a plan and compare with the target
    Validate {
        /// Plan file: JSON list of burn records as written by `plan`
        #[arg(long)]
        plan: PathBuf,
        /// Skip the LP lower-bound check
        #[arg(long)]
        no_oracle: bool,
    },
    /// Final-state error statistics of a plan
    Error {
        #[arg(long)]
        plan: PathBuf,
        /// Error model file (JSON)
        #[arg(long)]
        errors: PathBuf,
    },
}

fn exit_code(f: &Fault) -> u8 {
    match f {
        Fault::Config { .. } | Fault::Domain(_) => 2,
        Fault::Infeasible { .. } | Fault::NoFeasibleEpoch { .. } | Fault::NotReachableAtDvMin(_) => 3,
        Fault::Numerical(_) | Fault::Internal(_) => 4,
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Fault> {
    let text = fs::read_to_string(path).map_err(|e| Fault::config(path.display().to_string(), e.to_string()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let p = e.path().to_string();
        Fault::config(if p == "." { path.display().to_string() } else { p }, e.into_inner().to_string())
    })
}

fn load_scenario(cli: &Cli) -> Result<Scenario, Fault> {
    let path = cli.config.as_ref().ok_or_else(|| Fault::config("--config", "a scenario file is required"))?;
    let cfg: ScenarioConfig = read_json(path)?;
    let mut s = cfg.resolve()?;
    if let Some(seed) = cli.seed {
        s.options.error.seed = seed;
    }
    Ok(s)
}

fn load_plan(path: &Path) -> Result<Vec<Maneuver>, Fault> {
    let records: Vec<PlanRecord> = read_json(path)?;
    Ok(maneuvers_from_records(&records))
}

struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    fn emit(&self, name: &str, body: &str) -> Result<(), Fault> {
        match &self.dir {
            Some(d) => {
                let io = |e: std::io::Error| Fault::config("--out", e.to_string());
                fs::create_dir_all(d).map_err(io)?;
                fs::write(d.join(name), body).map_err(io)
            }
            None => {
                let mut so = std::io::stdout().lock();
                match so.write_all(body.as_bytes()).and_then(|_| so.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Fault::Internal(format!("stdout: {e}"))),
                    _ => Ok(()),
                }
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), Fault> {
    let s = load_scenario(cli)?;
    let out = Output { dir: cli.out.clone() };
    let fmt = cli.format;
    match &cli.command {
        Command::Dvmin => {
            let a = s.dominance()?;
            out.emit(&format!("dvmin.{}", fmt.ext()), &render::dvmin(&s, &a, fmt))
        }
        Command::Plan => {
            let rep = s.plan()?;
            out.emit(&format!("plans.{}", fmt.ext()), &render::plans(&s, &rep, fmt))?;
            if out.dir.is_some() {
                if let Some(best) = rep.best() {
                    out.emit("best_plan.json", &render::records_json(best))?;
                }
                for (k, p) in rep.plans.iter().enumerate() {
                    out.emit(&format!("plan_{k:02}.json"), &render::records_json(p))?;
                }
            }
            Ok(())
        }
        Command::Reachset { plane, cost, samples } => {
            let plane: Plane = plane.parse().map_err(|e: Fault| Fault::config("--plane", e.to_string()))?;
            let n = samples.unwrap_or(s.options.reachset.samples);
            if n < 64 {
                return Err(Fault::config("--samples", "need at least 64 samples"));
            }
            if !cost.is_finite() || *cost < 0.0 {
                return Err(Fault::config("--cost", "must be finite and non-negative"));
            }
            let pts = sample_points(plane, *cost, &s.chief, s.t_f, n);
            let hull = ConvexHull2D::from_points(pts.clone(), *cost, plane);
            let csv_of = |p: &[_]| -> Result<String, Fault> {
                let mut buf = Vec::new();
                write_points_csv(&mut buf, plane, p)?;
                Ok(String::from_utf8(buf).expect("csv is utf-8"))
            };
            match fmt {
                Format::Csv => {
                    out.emit(&format!("reachset_{}_hull.csv", plane.name()), &csv_of(&hull.vertices)?)?;
                    if out.dir.is_some() {
                        out.emit(&format!("reachset_{}_points.csv", plane.name()), &csv_of(&pts)?)?;
                    }
                    Ok(())
                }
                _ => out.emit(&format!("reachset_{}.{}", plane.name(), fmt.ext()), &render::hull(&s, &hull, n, fmt)),
            }
        }
        Command::Validate { plan, no_oracle } => {
            let m = load_plan(plan)?;
            let rep = s.validate(&m, !no_oracle)?;
            out.emit(&format!("validate.{}", fmt.ext()), &render::validation(&s, &rep, fmt))
        }
        Command::Error { plan, errors } => {
            let m = load_plan(plan)?;
            let models: ErrorModelFile = read_json(errors)?;
            let rows = s.error_analysis(&m, &models)?;
            out.emit(&format!("error.{}", fmt.ext()), &render::errors(&s, &rows, fmt))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("roeplan: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("roeplan: {f}");
            if let Fault::Infeasible { hint: Some(h), .. } = &f {
                eprintln!("hint: {h}");
            }
            ExitCode::from(exit_code(&f))
        }
    }
}
