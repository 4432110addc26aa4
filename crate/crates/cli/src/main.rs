use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use uav_tpc::deployment::solve_deployment;
use uav_tpc::{run_scheme, KinematicLimits, Scenario, Scheme, SchemeConfig};
use uav_tpc_cli::{
    emit_plots, emit_run_plots, generate_scenario_file, run_benchmark, scheme_run, BenchConfig, Cell, CellResult,
    CliError, CliResult, GenerateConfig, RunReport, ScenarioFile,
};

#[derive(Parser)]
#[command(
    name = "uav-tpc",
    version,
    about = "Trajectory and power control for multi-UAV interference links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario file.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        params: ScenarioArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Solve the static hovering problem and print the hover points.
    Deploy {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run one scheme on a scenario file.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "sca")]
        scheme: Scheme,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, short)]
        out: PathBuf,
        /// Skip the figures.
        #[arg(long)]
        no_plots: bool,
    },
    /// Compare schemes over scenario files or freshly generated scenarios.
    Bench {
        /// Scenario files; when absent, `--seeds` scenarios are generated.
        #[arg(long = "scenario")]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[command(flatten)]
        params: ScenarioArgs,
        /// Comma-separated subset of sca,parallel,segment,slot,fdma,tdma.
        #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "sca,parallel,segment,slot,fdma,tdma")]
        schemes: Vec<Scheme>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Draw figures from a saved report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

/// Scenario parameters; defaults match the reference setup.
#[derive(Args, Clone)]
struct ScenarioArgs {
    #[arg(long = "links", short = 'k', default_value_t = 4)]
    num_links: usize,
    /// Side of the square area (km).
    #[arg(long, default_value_t = 1.0)]
    area_km: f64,
    /// Flight time (s).
    #[arg(long, default_value_t = 600.0)]
    time: f64,
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    p_max_dbm: f64,
    #[arg(long, default_value_t = 20.0)]
    v_level: f64,
    #[arg(long, default_value_t = 5.0)]
    v_ascend: f64,
    #[arg(long, default_value_t = 3.0)]
    v_descend: f64,
    #[arg(long, default_value_t = 100.0)]
    h_min: f64,
    #[arg(long, default_value_t = 500.0)]
    h_max: f64,
    #[arg(long, default_value_t = 20.0)]
    d_min: f64,
    /// Hz.
    #[arg(long, default_value_t = 10e6)]
    bandwidth: f64,
    #[arg(long, default_value_t = -50.0, allow_negative_numbers = true)]
    beta0_db: f64,
    #[arg(long, default_value_t = -160.0, allow_negative_numbers = true)]
    noise_dbm_hz: f64,
}

impl From<&ScenarioArgs> for GenerateConfig {
    fn from(a: &ScenarioArgs) -> Self {
        Self {
            num_links: a.num_links,
            area_km: a.area_km,
            total_time: a.time,
            p_max_dbm: a.p_max_dbm,
            bandwidth: a.bandwidth,
            beta0_db: a.beta0_db,
            noise_dbm_per_hz: a.noise_dbm_hz,
            limits: KinematicLimits {
                v_level: a.v_level,
                v_ascend: a.v_ascend,
                v_descend: a.v_descend,
                h_min: a.h_min,
                h_max: a.h_max,
                d_min: a.d_min,
            },
        }
    }
}

#[derive(Serialize)]
struct DeployOutput {
    hover_positions: Vec<[f64; 3]>,
    hover_powers: Vec<f64>,
    hover_sum_rate: f64,
    iterations: usize,
}

fn load(path: &Path) -> CliResult<(Scenario, u64)> {
    let file = ScenarioFile::load(path)?;
    Ok((file.to_scenario()?, file.seed))
}

/// Runs one command and returns what it prints on success.
fn run(cli: Cli) -> CliResult<String> {
    let text = match cli.command {
        Command::Gen { seed, params, out } => {
            let file = generate_scenario_file(seed, &GenerateConfig::from(&params))?;
            file.to_scenario()?;
            file.save(&out)?;
            format!("wrote {}\n", out.display())
        }
        Command::Deploy { scenario } => {
            let (scen, _) = load(&scenario)?;
            let dep = solve_deployment(&scen, &Default::default())?;
            let out = DeployOutput {
                hover_positions: dep.hover_positions.iter().map(|p| [p[0], p[1], p[2]]).collect(),
                hover_powers: dep.hover_powers.clone(),
                hover_sum_rate: dep.hover_sum_rate,
                iterations: dep.trace.iterations,
            };
            serde_json::to_string_pretty(&out).map_err(|e| CliError::Parse(e.to_string()))? + "\n"
        }
        Command::Solve {
            scenario,
            scheme,
            threads,
            out,
            no_plots,
        } => {
            let (scen, seed) = load(&scenario)?;
            let mut cfg = SchemeConfig::default();
            cfg.parallel.threads = threads;
            cfg.segment.parallel.threads = threads;
            let clock = Instant::now();
            let result = run_scheme(&scen, scheme, &cfg)?;
            let run = scheme_run(&result, &scen, clock.elapsed().as_secs_f64())?;
            let cell = Cell {
                scenario: 0,
                scheme,
                seed: Some(seed),
                result: CellResult::Ok(Box::new(run.clone())),
            };
            let report = RunReport::new(1, vec![cell]);
            report.write(&out)?;
            if !no_plots {
                emit_run_plots(&run, scheme.name(), &out)?;
            }
            report.table()
        }
        Command::Bench {
            scenarios,
            seeds,
            first_seed,
            params,
            schemes,
            threads,
            jobs,
            out,
        } => {
            let (scens, seed_list) = if scenarios.is_empty() {
                let gen = GenerateConfig::from(&params);
                let seed_list: Vec<u64> = (first_seed..first_seed + seeds).collect();
                let scens = seed_list
                    .iter()
                    .map(|&s| generate_scenario_file(s, &gen)?.to_scenario())
                    .collect::<CliResult<Vec<_>>>()?;
                (scens, seed_list)
            } else {
                scenarios
                    .iter()
                    .map(|p| load(p))
                    .collect::<CliResult<Vec<_>>>()?
                    .into_iter()
                    .unzip()
            };
            let cfg = BenchConfig {
                schemes,
                threads,
                jobs,
                ..Default::default()
            };
            let report = run_benchmark(&scens, Some(&seed_list), &cfg)?;
            report.write(&out)?;
            report.table()
        }
        Command::Plot { report, out } => {
            let rep = RunReport::load(&report)?;
            let files = emit_plots(&rep, &out)?;
            format!("wrote {} files to {}\n", files.len(), out.display())
        }
    };
    Ok(text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(text) => {
            // A closed pipe (e.g. `| head`) is not an error of ours.
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: writing output: {e}");
                    ExitCode::from(4)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
