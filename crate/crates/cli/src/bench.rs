//! Runs a set of schemes over a set of scenarios and collects a report.

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use uav_tpc::{check_feasibility, run_scheme, Scenario, Scheme, SchemeConfig, SchemeOutcome};

use crate::error::{CliError, CliResult};
use crate::report::{Cell, CellResult, RunReport, SchemeRun};
use crate::scenario_file::to_triples;

/// Feasibility tolerance applied to every reported trajectory.
pub const REPORT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub schemes: Vec<Scheme>,
    /// Worker threads of the parallel scheme; `None` means one per UAV.
    pub threads: Option<usize>,
    /// Scenario solves run concurrently. Values above 1 distort wall times.
    pub jobs: usize,
    pub solver: SchemeConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            threads: None,
            jobs: 1,
            solver: SchemeConfig::default(),
        }
    }
}

/// Converts a finished scheme into report form, rejecting outputs that fail
/// the feasibility check.
pub fn scheme_run(out: &SchemeOutcome, scen: &Scenario, wall_seconds: f64) -> CliResult<SchemeRun> {
    let full = &out.run.full;
    let rep = check_feasibility(full, scen, REPORT_TOL)?;
    if !rep.is_feasible() {
        return Err(CliError::Invalid(format!(
            "{} produced an infeasible trajectory: {rep:?}",
            out.scheme
        )));
    }
    let trace = &out.run.trace;
    Ok(SchemeRun {
        aggregate_rate: full.sum_rate(),
        total_bits: full.total_bits(),
        wall_seconds,
        solve_seconds: out.run.solve_seconds,
        iterations: trace.iterations,
        newton_steps: trace.newton_steps,
        converged: trace.converged,
        hover_slot: out.run.hover_slot(),
        slot_len: full.slot_len,
        objectives: trace.objectives.clone(),
        precision: trace.precision(),
        slot_rates: (0..full.num_slots()).map(|n| full.slot_sum_rate(n)).collect(),
        ground_terminals: to_triples(&scen.gt_positions),
        positions: full.positions.iter().map(|p| to_triples(p)).collect(),
        powers: full.powers.clone(),
    })
}

fn run_cell(idx: usize, seed: Option<u64>, scen: &Scenario, scheme: Scheme, solver: &SchemeConfig) -> Cell {
    let clock = Instant::now();
    let result = run_scheme(scen, scheme, solver)
        .map_err(CliError::from)
        .and_then(|out| scheme_run(&out, scen, clock.elapsed().as_secs_f64()));
    let result = match result {
        Ok(r) => {
            info!(
                "scenario {idx} {scheme}: {:.6e} bit/s in {:.2} s",
                r.aggregate_rate, r.wall_seconds
            );
            CellResult::Ok(Box::new(r))
        }
        Err(e) => {
            warn!("scenario {idx} {scheme} failed: {e}");
            CellResult::Failed { message: e.to_string() }
        }
    };
    Cell {
        scenario: idx,
        scheme,
        seed,
        result,
    }
}

/// Runs every scheme of `cfg` on every scenario. `seeds`, when given, must
/// match `scenarios` in length and is copied into the cells.
pub fn run_benchmark(scenarios: &[Scenario], seeds: Option<&[u64]>, cfg: &BenchConfig) -> CliResult<RunReport> {
    if seeds.is_some_and(|s| s.len() != scenarios.len()) {
        return Err(CliError::Invalid("one seed per scenario is required".into()));
    }
    if cfg.jobs == 0 || cfg.threads == Some(0) {
        return Err(CliError::Invalid("thread counts must be positive".into()));
    }
    let mut solver = cfg.solver;
    solver.parallel.threads = cfg.threads;
    solver.segment.parallel.threads = cfg.threads;
    let tasks: Vec<(usize, Scheme)> = (0..scenarios.len())
        .flat_map(|i| cfg.schemes.iter().map(move |&s| (i, s)))
        .collect();
    let seed = |i: usize| seeds.map(|s| s[i]);
    let cells: Vec<Cell> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        pool.install(|| {
            tasks
                .par_iter()
                .map(|&(i, s)| run_cell(i, seed(i), &scenarios[i], s, &solver))
                .collect()
        })
    } else {
        tasks
            .iter()
            .map(|&(i, s)| run_cell(i, seed(i), &scenarios[i], s, &solver))
            .collect()
    };
    Ok(RunReport::new(scenarios.len(), cells))
}
