use std::collections::BTreeMap;

use ctl_core::bounds::{self, Delta1Choice};
use ctl_lab::result::{csv_bytes, read_csv, write_csv};
use ctl_lab::suite::{self, SuiteOptions};
use ctl_lab::sweeps::{self, spearman};
use ctl_lab::{parse_config, run_experiment, Row};

fn cfg(text: &str) -> ctl_lab::ExperimentConfig {
    parse_config(text).unwrap()
}

fn by_seed(rows: &[Row]) -> BTreeMap<u64, Vec<Row>> {
    let mut out: BTreeMap<u64, Vec<Row>> = BTreeMap::new();
    for r in rows {
        out.entry(r.seed).or_default().push(r.clone());
    }
    out
}

#[test]
fn same_config_same_bytes() {
    for text in [
        r#"{"kind": "StabSweep", "grid": {"n": [2, 3], "N": [64]}, "trials": 6, "baseSeed": 3}"#,
        r#"{"kind": "RegretSweep", "grid": {"n": [3, 4], "T": [256]}, "trials": 6, "baseSeed": 3}"#,
        r#"{"kind": "LemmaSuite", "grid": {"n": [3, 4]}, "trials": 4, "baseSeed": 3}"#,
        r#"{"kind": "BoundTable"}"#,
    ] {
        let c = cfg(text);
        let first = csv_bytes(&run_experiment(&c).unwrap());
        let second = csv_bytes(&run_experiment(&c).unwrap());
        assert_eq!(first, second, "{text}");
    }
    let c = cfg(r#"{"kind": "StabSweep", "grid": {"n": [3], "N": [64]}, "trials": 6}"#);
    let a = csv_bytes(&run_experiment(&c.clone().with_seed(1)).unwrap());
    let b = csv_bytes(&run_experiment(&c.with_seed(2)).unwrap());
    assert_ne!(a, b);
}

#[test]
fn csv_file_round_trip() {
    let c = cfg(r#"{"kind": "RegretSweep", "grid": {"n": [3], "T": [128, 256]}, "trials": 5, "baseSeed": 9}"#);
    let res = run_experiment(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("regret.csv");
    write_csv(&res, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back.rows, res.rows);
    assert_eq!(back.provenance.config_hash, c.hash());
    assert_eq!(std::fs::read(&path).unwrap(), csv_bytes(&res));
}

#[test]
fn stab_rows_regenerate_from_their_seed() {
    let c = cfg(r#"{"kind": "StabSweep", "grid": {"n": [2, 3], "N": [32, 128]}, "trials": 5, "baseSeed": 11}"#);
    let res = run_experiment(&c).unwrap();
    for (seed, rows) in by_seed(&res.rows) {
        let r = &rows[0];
        let p = |k: &str| r.param(k).unwrap();
        let again = sweeps::stab_cell(p("n") as usize, p("mu"), p("N") as usize, p("delta"), p("sigma_u2"), 5, seed).unwrap();
        assert_eq!(again, rows);
    }
}

#[test]
fn regret_rows_regenerate_from_their_seed() {
    let c = cfg(r#"{"kind": "RegretSweep", "grid": {"n": [3, 4], "T": [256]}, "trials": 6, "baseSeed": 5}"#);
    let res = run_experiment(&c).unwrap();
    let cells: Vec<_> = res.rows.iter().filter(|r| r.param("n").is_some()).cloned().collect();
    for (seed, rows) in by_seed(&cells) {
        let (n, t) = (rows[0].param("n").unwrap() as usize, rows[0].param("T").unwrap() as usize);
        assert_eq!(sweeps::regret_cell(n, t, 6, seed).unwrap(), rows);
    }
}

#[test]
fn lemma_rows_regenerate_from_their_seed() {
    let c = cfg(r#"{"kind": "LemmaSuite", "grid": {"n": [3, 5], "mu": []}, "trials": 6, "baseSeed": 2}"#);
    let res = run_experiment(&c).unwrap();
    let random: Vec<_> = res.rows.iter().filter(|r| r.param("instance").is_some()).cloned().collect();
    assert_eq!(random.len(), 2 * 6 * 4);
    for (seed, rows) in by_seed(&random) {
        let p = |k: &str| rows[0].param(k).unwrap() as usize;
        let again = suite::random_instance_rows(p("n"), p("p"), p("instance"), seed, &SuiteOptions::default()).unwrap();
        assert_eq!(again, rows);
    }
}

#[test]
fn lower_bound_column_is_the_bound() {
    let c = cfg(r#"{"kind": "RegretSweep", "grid": {"T": [64]}, "trials": 3}"#);
    let res = run_experiment(&c).unwrap();
    let mut seen = 0;
    for r in res.metric("regret_sweep", "lower_bound") {
        let n = r.param("n").unwrap() as usize;
        assert_eq!(r.value, bounds::two_subsystem_bound(n, &Delta1Choice::TopEigenvector).unwrap());
        seen += 1;
    }
    assert_eq!(seen, 4);
}

#[test]
fn regret_medians_are_nonnegative() {
    let c = cfg(r#"{"kind": "RegretSweep", "grid": {"n": [3, 4], "T": [1024, 4096]}, "trials": 15}"#);
    let res = run_experiment(&c).unwrap();
    for r in res.metric("regret_sweep", "regret_per_root_t_median") {
        assert!(r.value >= 0.0, "{r:?}");
    }
}

#[test]
fn spearman_cases() {
    assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 100.0]) - 1.0).abs() < 1e-15);
    assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    // ties share the average rank
    let r = spearman(&[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]);
    assert!((r - 2.0 / 5f64.sqrt()).abs() < 1e-12, "{r}");
}

#[test]
fn empty_grid_gives_empty_result() {
    let c = cfg(r#"{"kind": "LemmaSuite", "grid": {"n": []}}"#);
    let res = run_experiment(&c).unwrap();
    assert!(res.rows.is_empty());
    assert!(suite::suite_passed(&res));
}

#[test]
fn corrupted_coupling_shrinks_the_gramian_margin() {
    let c = cfg(r#"{"kind": "LemmaSuite", "grid": {"n": [2, 3, 4], "mu": [], "rho": []}, "trials": 20}"#);
    let honest = suite::run_lemma_suite(&c).unwrap();
    let doubled = suite::run_lemma_suite_with(&c, &SuiteOptions { mu_scale: 2.0 }).unwrap();
    let ratio = |r: &Row| r.param("lhs").unwrap() / r.param("rhs").unwrap();
    let pairs = honest.metric("gramian_lower_bound", "pass").zip(doubled.metric("gramian_lower_bound", "pass"));
    for (a, b) in pairs {
        let kappa = a.param("kappa").unwrap() as i32;
        let predicted = ratio(a) * 2f64.powi(2 + 2 * kappa);
        assert!((ratio(b) - predicted).abs() <= 1e-9 * predicted);
    }
    let quadrupled = suite::run_lemma_suite_with(&c, &SuiteOptions { mu_scale: 4.0 }).unwrap();
    assert!(suite::suite_passed(&honest));
    assert!(suite::failures(&quadrupled).any(|r| r.label == "gramian_lower_bound"));
}

fn rates(res: &ctl_lab::ExperimentResult, metric: &str, n: f64) -> Vec<(f64, f64, u64)> {
    res.metric("stab_sweep", metric)
        .filter(|r| r.param("n") == Some(n))
        .map(|r| (r.param("N").unwrap(), r.value, r.trials))
        .collect()
}

#[test]
fn success_rates_do_not_fall_with_more_samples() {
    let c = cfg(r#"{"kind": "StabSweep", "grid": {"n": [2, 3], "N": [16, 64, 256, 1024, 4096]}, "trials": 30, "baseSeed": 21}"#);
    let res = run_experiment(&c).unwrap();
    for n in [2.0, 3.0] {
        for metric in ["success_worst", "candidate_s1", "candidate_s2"] {
            let cells = rates(&res, metric, n);
            for w in cells.windows(2) {
                let (lo, hi) = (w[0].1, w[1].1);
                let pooled = (lo + hi) / 2.0;
                let se = (2.0 * pooled * (1.0 - pooled) / w[0].2 as f64).sqrt();
                assert!(hi >= lo - 2.0 * se, "n={n} {metric}: {cells:?}");
            }
        }
    }
}

#[test]
fn ten_times_the_knee_stabilizes_the_pair() {
    let knee = [1024usize, 2048, 4096, 8192, 16384]
        .into_iter()
        .find(|&big_n| {
            let rows = sweeps::stab_cell(2, 0.5, big_n, 0.1, 1.0, 20, 40 + big_n as u64).unwrap();
            rows.iter().any(|r| r.metric == "success_worst" && r.value >= 0.5)
        })
        .expect("knee within the grid");
    let rows = sweeps::stab_cell(2, 0.5, 10 * knee, 0.1, 1.0, 40, 77).unwrap();
    let worst = rows.iter().find(|r| r.metric == "success_worst").unwrap().value;
    assert!(worst >= 0.95, "knee {knee}: {worst}");
}

#[test]
fn regret_grows_with_dimension() {
    let c = cfg(r#"{"kind": "RegretSweep", "grid": {"T": [4096]}, "trials": 20, "baseSeed": 4}"#);
    let res = run_experiment(&c).unwrap();
    let rho = res.metric("regret_sweep", "spearman_n").next().unwrap();
    // under independence rho * sqrt(m - 1) is approximately standard normal
    let z = rho.value / rho.stderr;
    assert!(rho.value > 0.0 && z > 1.645, "{rho:?}");
}
