use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use continuum_teleop::harness::{self, RunConfig, RunLog, RunSummary};
use continuum_teleop::metrics::{case_report, DexterityReport};
use continuum_teleop::solver::PriorityCase;

/// Offline simulation and live teleoperation of an RCM-constrained
/// continuum instrument.
#[derive(Parser)]
#[command(name = "ctele", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted overrides applied after the file, e.g. `--control.dt 0.002`
    /// or `--case=case1`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> continuum_teleop::Result<RunConfig> {
        let pairs = parse_overrides(&self.overrides)?;
        RunConfig::load_with_overrides(self.config.as_deref(), &pairs)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured trajectory offline and write the CSV log.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare every analytic Jacobian with finite differences.
    CheckJacobians {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Summarize logs; three logs are compared as cases 0, 1 and 2.
    Metrics {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Start the WebSocket teleoperation service.
    Serve {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write the sampled reference path as CSV.
    GenTrajectory {
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn parse_overrides(args: &[String]) -> continuum_teleop::Result<Vec<(String, String)>> {
    let bad = |m: String| continuum_teleop::Error::Config(m);
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| bad(format!("expected --key, found '{a}'")))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| bad(format!("missing value for --{key}")))?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> continuum_teleop::Result<ExitCode> {
    match command {
        Command::Simulate { cfg } => {
            let cfg = cfg.load()?;
            let outcome = harness::run_simulation(&cfg)?;
            match &cfg.output {
                Some(csv) => {
                    let side = harness::write_outputs(&outcome, csv)?;
                    log::info!("wrote {} and {}", csv.display(), side.display());
                }
                None => log::info!("no output path set; pass --output run.csv to keep the log"),
            }
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
            Ok(if outcome.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::CheckJacobians { samples, seed, cfg } => {
            let cfg = cfg.load()?;
            let start = std::time::Instant::now();
            let report = harness::check_jacobians(&cfg.kinematics, samples, seed);
            for c in &report.checks {
                println!(
                    "{:<8} max rel err {:.3e}  {}",
                    c.name,
                    c.max_relative_error,
                    if c.pass { "PASS" } else { "FAIL" }
                );
            }
            println!("{} samples in {:.2} s", samples, start.elapsed().as_secs_f64());
            Ok(if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Metrics { logs, json } => {
            let mut series = Vec::new();
            for path in &logs {
                let log = read_log(path)?;
                let label = path
                    .file_stem()
                    .map_or("run".into(), |s| s.to_string_lossy().into_owned());
                series.push(log.series(&label));
            }
            let report = case_report(&series);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.table());
                if series.len() == 1 {
                    let d = DexterityReport::of(&series[0]);
                    println!("{}", serde_json::to_string_pretty(&d)?);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { cfg } => {
            let cfg = cfg.load()?;
            let handle = harness::serve(cfg)?;
            println!("listening on ws://{}", handle.addr);
            handle.wait();
            Ok(ExitCode::SUCCESS)
        }
        Command::GenTrajectory { out, cfg } => {
            let cfg = cfg.load()?;
            let traj = harness::gen_trajectory(&cfg.trajectory, &cfg.initial.state(), &cfg.kinematics)?;
            let mut text = String::from("time,x,y,z,qx,qy,qz,qw\n");
            for (t, p) in traj.times.iter().zip(&traj.poses) {
                let c = harness::sim::pose_columns(p);
                text += &format!("{t:e},{}\n", c.map(|x| format!("{x:e}")).join(","));
            }
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Reads a CSV log; the case comes from the JSON summary next to it when present.
fn read_log(path: &Path) -> continuum_teleop::Result<RunLog> {
    let side = harness::sim::summary_path(path);
    let case = std::fs::read_to_string(&side)
        .ok()
        .and_then(|s| serde_json::from_str::<RunSummary>(&s).ok())
        .map_or(PriorityCase::Case0, |s| s.case);
    RunLog::read_csv(&std::fs::read_to_string(path)?, case)
}
