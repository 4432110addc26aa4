use uav_tpc::{check_feasibility, Scheme};
use uav_tpc_cli::report::CellResult;
use uav_tpc_cli::{generate_scenario, run_benchmark, BenchConfig, GenerateConfig, RunReport};

fn scenarios(k: usize, seeds: std::ops::Range<u64>) -> (Vec<uav_tpc::Scenario>, Vec<u64>) {
    let cfg = GenerateConfig {
        num_links: k,
        ..Default::default()
    };
    let seeds: Vec<u64> = seeds.collect();
    (
        seeds.iter().map(|&s| generate_scenario(s, &cfg).unwrap()).collect(),
        seeds,
    )
}

fn bench(schemes: &[Scheme]) -> BenchConfig {
    BenchConfig {
        schemes: schemes.to_vec(),
        ..Default::default()
    }
}

#[test]
fn empty_scheme_set_gives_empty_report() {
    let (scens, seeds) = scenarios(2, 0..2);
    let rep = run_benchmark(&scens, Some(&seeds), &bench(&[])).unwrap();
    assert!(rep.cells.is_empty() && rep.summary.is_empty());
    assert_eq!(rep.scenarios, 2);
    assert_eq!(rep.table().lines().count(), 2);
}

#[test]
fn parallel_tracks_centralized_on_two_links() {
    let (scens, seeds) = scenarios(2, 0..5);
    let rep = run_benchmark(&scens, Some(&seeds), &bench(&[Scheme::Sca, Scheme::Parallel])).unwrap();
    let sca = rep.summary_for(Scheme::Sca).unwrap();
    let par = rep.summary_for(Scheme::Parallel).unwrap();
    assert_eq!((sca.solved, par.solved), (5, 5), "{}", rep.table());
    let (a, b) = (sca.mean_aggregate_rate.unwrap(), par.mean_aggregate_rate.unwrap());
    assert!((a - b).abs() <= 0.02 * a, "sca {a:e} parallel {b:e}");
}

#[test]
fn fdma_column_dominates_tdma_column() {
    let (scens, seeds) = scenarios(3, 20..22);
    let rep = run_benchmark(&scens, Some(&seeds), &bench(&[Scheme::Fdma, Scheme::Tdma])).unwrap();
    let f = rep.summary_for(Scheme::Fdma).unwrap().mean_aggregate_rate.unwrap();
    let t = rep.summary_for(Scheme::Tdma).unwrap().mean_aggregate_rate.unwrap();
    assert!(f >= t, "fdma {f:e} tdma {t:e}");
    for (cell, scen) in rep.cells.iter().zip(scens.iter().flat_map(|s| [s, s])) {
        let run = cell.run().unwrap();
        let sol = uav_tpc::TrajectorySolution::evaluate(
            run.positions
                .iter()
                .map(|p| p.iter().map(|q| uav_tpc::Point::new(q[0], q[1], q[2])).collect())
                .collect(),
            run.powers.clone(),
            scen,
        )
        .unwrap();
        assert!(check_feasibility(&sol, scen, 1e-6).unwrap().is_feasible());
    }
}

#[test]
fn failures_are_recorded_per_cell() {
    let (scens, seeds) = scenarios(2, 0..1);
    let mut cfg = bench(&[Scheme::Fdma, Scheme::Sca]);
    cfg.solver.pipeline.sca.max_iter = 0;
    let rep = run_benchmark(&scens, Some(&seeds), &cfg).unwrap();
    assert_eq!(rep.cells.len(), 2);
    for c in &rep.cells {
        assert!(matches!(c.result, CellResult::Failed { .. }), "{:?}", c.scheme);
    }
    let s = rep.summary_for(Scheme::Sca).unwrap();
    assert_eq!((s.solved, s.failed), (0, 1));
    assert!(s.mean_aggregate_rate.is_none());
    assert!(rep.table().contains(" - "));
}

#[test]
fn thread_count_changes_time_only() {
    let (scens, seeds) = scenarios(3, 7..8);
    let mut cfg = bench(&[Scheme::Parallel]);
    cfg.threads = Some(1);
    let one = run_benchmark(&scens, Some(&seeds), &cfg).unwrap();
    cfg.threads = Some(3);
    let three = run_benchmark(&scens, Some(&seeds), &cfg).unwrap();
    let (a, b) = (one.cells[0].run().unwrap(), three.cells[0].run().unwrap());
    assert!((a.aggregate_rate - b.aggregate_rate).abs() <= 1e-9 * a.aggregate_rate);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn report_json_round_trips_exactly() {
    let (scens, seeds) = scenarios(2, 3..4);
    let rep = run_benchmark(&scens, Some(&seeds), &bench(&[Scheme::Tdma])).unwrap();
    let back = RunReport::from_json(&rep.to_json().unwrap()).unwrap();
    assert_eq!(back, rep);
    let table = rep.table();
    let mean = rep.summary[0].mean_aggregate_rate.unwrap();
    let cell: f64 = table
        .lines()
        .nth(2)
        .unwrap()
        .split_whitespace()
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!((cell - mean).abs() <= 1e-11 * mean);
    let dir = tempfile::tempdir().unwrap();
    let (json, txt) = rep.write(dir.path()).unwrap();
    assert_eq!(RunReport::load(&json).unwrap(), rep);
    assert_eq!(std::fs::read_to_string(txt).unwrap(), table);
}

#[test]
fn mismatched_seed_list_is_rejected() {
    let (scens, _) = scenarios(2, 0..2);
    assert!(run_benchmark(&scens, Some(&[1]), &bench(&[Scheme::Sca])).is_err());
}
