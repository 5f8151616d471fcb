//! Monte-Carlo sweeps over the stabilization and regret experiments, and the
//! closed-form bound table.
//!
//! Cells are visited in lexicographic grid order and each cell draws its
//! seed from the base seed and its position, so any row can be regenerated
//! from its `seed` column alone.

use ctl_core::bounds::{self, Delta1Choice};
use ctl_core::instances;
use ctl_core::learnpipe::{self, CeOptions};
use ctl_core::riccati;
use ctl_core::sysmodel::{substream_seed, CostSpec};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::result::{ExperimentResult, Provenance, Row};
use crate::LabError;

/// Trials used to calibrate the identification radii of each cell.
pub const CALIBRATION_TRIALS: usize = 100;
pub const CALIBRATION_QUANTILE: f64 = 0.99;
const CALIBRATION_STREAM: u64 = u64::MAX;

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.base_seed,
    }
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<(), LabError> {
    if cfg.kind == kind {
        Ok(())
    } else {
        Err(LabError::Config {
            path: "kind".into(),
            message: format!("expected {kind:?}, got {:?}", cfg.kind),
        })
    }
}

fn rate_stderr(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// Rows of one stabilization cell: success rates on both members of the
/// pair, the worst of the two, the uncertified candidate rates, the error
/// counts and the sample-complexity lower bound.
pub fn stab_cell(
    n: usize,
    mu: f64,
    samples: usize,
    delta: f64,
    sigma_u2: f64,
    trials: usize,
    cell_seed: u64,
) -> Result<Vec<Row>, LabError> {
    let pair = instances::make_stab_pair(n, mu, 0.0)?;
    let params = [
        ("n", n as f64),
        ("mu", mu),
        ("N", samples as f64),
        ("delta", delta),
        ("sigma_u2", sigma_u2),
    ];
    let row = |metric: &str, value: f64, stderr: f64, t: usize| {
        Row::new("stab_sweep", &params, metric, value).stats(stderr, t as u64).seeded(cell_seed)
    };
    let mut rows = Vec::new();
    let mut success = [0.0; 2];
    for (i, sys) in [&pair.s1, &pair.s2].into_iter().enumerate() {
        let member_seed = substream_seed(cell_seed, i as u64);
        let cal_seed = substream_seed(member_seed, CALIBRATION_STREAM);
        let radii = learnpipe::calibrate_radii(sys, sigma_u2, samples, CALIBRATION_TRIALS, CALIBRATION_QUANTILE, cal_seed)?;
        let outcomes: Vec<_> = (0..trials as u64)
            .into_par_iter()
            .map(|t| learnpipe::run_stab_pipeline(sys, sigma_u2, samples, substream_seed(member_seed, t), radii))
            .collect();
        let count = |f: &dyn Fn(&learnpipe::StabOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
        let ok = count(&|o| o.stabilized) as f64 / trials as f64;
        let cand = count(&|o| o.candidate_stabilizes) as f64 / trials as f64;
        let errors = count(&|o| o.error.is_some());
        let tag = i + 1;
        rows.push(row(&format!("success_s{tag}"), ok, rate_stderr(ok, trials), trials));
        rows.push(row(&format!("candidate_s{tag}"), cand, rate_stderr(cand, trials), trials));
        rows.push(row(&format!("errors_s{tag}"), errors as f64, 0.0, trials));
        rows.push(row(&format!("radius_a_s{tag}"), radii.eps_a, 0.0, CALIBRATION_TRIALS));
        rows.push(row(&format!("radius_b_s{tag}"), radii.eps_b, 0.0, CALIBRATION_TRIALS));
        success[i] = ok;
    }
    let worst = success[0].min(success[1]);
    rows.push(row("success_worst", worst, rate_stderr(worst, trials), trials));
    let n_min = bounds::stab_sample_lower_bound(mu, n, delta, sigma_u2)?;
    rows.push(row("n_min", n_min as f64, 0.0, 0));
    Ok(rows)
}

pub fn run_stab_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult, LabError> {
    expect_kind(cfg, ExperimentKind::StabSweep)?;
    let g = &cfg.grid;
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &n in &g.n {
        for &mu in &g.mu {
            for &samples in &g.samples {
                for &delta in &g.delta {
                    for &s2 in &g.sigma_u2 {
                        let seed = substream_seed(cfg.base_seed, cell);
                        rows.extend(stab_cell(n, mu, samples, delta, s2, cfg.trials as usize, seed)?);
                        cell += 1;
                    }
                }
            }
        }
    }
    Ok(ExperimentResult {
        rows,
        provenance: provenance(cfg),
    })
}

/// Regret of certainty-equivalent online LQR on the integrator composite,
/// normalised by `sqrt(T)`, one value per trial in trial order. Diverged
/// trials are `None`.
pub fn regret_trials(n: usize, horizon: usize, trials: usize, cell_seed: u64) -> Result<Vec<Option<f64>>, LabError> {
    let comp = instances::make_integrator_composite(n)?;
    let cost = CostSpec::identity(n, comp.sys.p());
    let k0 = riccati::solve_dare(&comp.sys, &cost)?.k_star;
    let root_t = (horizon as f64).sqrt();
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let rec = learnpipe::ce_online_lqr(&comp.sys, &cost, horizon, &k0, substream_seed(cell_seed, t), CeOptions::default())?;
            Ok((!rec.diverged).then(|| rec.regret / root_t))
        })
        .collect()
}

pub fn regret_cell(n: usize, horizon: usize, trials: usize, cell_seed: u64) -> Result<Vec<Row>, LabError> {
    let values = regret_trials(n, horizon, trials, cell_seed)?;
    regret_rows(n, horizon, cell_seed, &values)
}

fn regret_rows(n: usize, horizon: usize, cell_seed: u64, values: &[Option<f64>]) -> Result<Vec<Row>, LabError> {
    let mut kept: Vec<f64> = values.iter().flatten().copied().collect();
    kept.sort_by(f64::total_cmp);
    let diverged = values.len() - kept.len();
    let params = [("n", n as f64), ("T", horizon as f64)];
    let row = |metric: &str, value: f64, stderr: f64, t: usize| {
        Row::new("regret_sweep", &params, metric, value).stats(stderr, t as u64).seeded(cell_seed)
    };
    let m = kept.len();
    let (median, iqr, median_se) = if m == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let iqr = learnpipe::quantile(&kept, 0.75) - learnpipe::quantile(&kept, 0.25);
        // normal-theory standard error of a median, with the IQR as scale
        let se = 1.2533 * (iqr / 1.349) / (m as f64).sqrt();
        (learnpipe::quantile(&kept, 0.5), iqr, se)
    };
    Ok(vec![
        row("regret_per_root_t_median", median, median_se, m),
        row("regret_per_root_t_iqr", iqr, 0.0, m),
        row("diverged", diverged as f64, 0.0, values.len()),
        row("lower_bound", bounds::two_subsystem_bound(n, &Delta1Choice::TopEigenvector)?, 0.0, 0),
    ])
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with ties averaged.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let m = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / m, ry.iter().sum::<f64>() / m);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn run_regret_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult, LabError> {
    expect_kind(cfg, ExperimentKind::RegretSweep)?;
    let g = &cfg.grid;
    let trials = cfg.trials as usize;
    let mut rows = Vec::new();
    let mut pooled: Vec<(usize, Vec<(f64, f64)>)> = g.horizon.iter().map(|&t| (t, Vec::new())).collect();
    let mut cell = 0u64;
    for &n in &g.n {
        for (ti, &horizon) in g.horizon.iter().enumerate() {
            let seed = substream_seed(cfg.base_seed, cell);
            cell += 1;
            let values = regret_trials(n, horizon, trials, seed)?;
            pooled[ti].1.extend(values.iter().flatten().map(|&v| (n as f64, v)));
            rows.extend(regret_rows(n, horizon, seed, &values)?);
        }
    }
    // rank correlation of regret/sqrt(T) with n, pooled over trials; the
    // stderr column is its null-hypothesis standard deviation
    for (horizon, pts) in pooled {
        if pts.len() < 3 || g.n.len() < 2 {
            continue;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let rho = spearman(&x, &y);
        let se = 1.0 / ((x.len() - 1) as f64).sqrt();
        rows.push(
            Row::new("regret_sweep", &[("T", horizon as f64)], "spearman_n", rho)
                .stats(se, x.len() as u64)
                .seeded(cfg.base_seed),
        );
    }
    Ok(ExperimentResult {
        rows,
        provenance: provenance(cfg),
    })
}

/// Closed-form quantities for every grid point; no randomness.
pub fn run_bound_table(cfg: &ExperimentConfig) -> Result<ExperimentResult, LabError> {
    expect_kind(cfg, ExperimentKind::BoundTable)?;
    let g = &cfg.grid;
    let mut rows = Vec::new();
    for &delta in &g.delta {
        let b = bounds::birge_threshold(delta)?;
        rows.push(Row::new("bound_table", &[("delta", delta)], "birge_exact", b.exact));
        rows.push(Row::new("bound_table", &[("delta", delta)], "birge_simplified", b.simplified));
    }
    for &n in &g.n {
        for &mu in &g.mu {
            for &delta in &g.delta {
                for &s2 in &g.sigma_u2 {
                    let params = [("n", n as f64), ("mu", mu), ("delta", delta), ("sigma_u2", s2)];
                    let n_min = bounds::stab_sample_lower_bound(mu, n, delta, s2)?;
                    rows.push(Row::new("bound_table", &params, "n_min", n_min as f64));
                }
            }
        }
        if n >= 3 {
            let p = [("n", n as f64)];
            rows.push(Row::new(
                "bound_table",
                &p,
                "two_subsystem_bound",
                bounds::two_subsystem_bound(n, &Delta1Choice::TopEigenvector)?,
            ));
            let q = bounds::integrator_exponent_quantity(n)?;
            rows.push(Row::new("bound_table", &p, "integrator_product_norm", q.numeric));
            rows.push(Row::new("bound_table", &p, "central_binomial_sum", q.binomial_sum as f64));
            rows.push(Row::new("bound_table", &p, "power_of_two", q.power as f64));
        }
        if n >= 4 {
            for &rho in &g.rho {
                let p = [("n", n as f64), ("rho", rho)];
                let q = bounds::stable_exponent_quantity(n, rho)?;
                rows.push(Row::new("bound_table", &p, "riccati_corner", q.riccati_corner));
                rows.push(Row::new("bound_table", &p, "corner_bound", q.lemma_bound));
                rows.push(Row::new("bound_table", &p, "stable_product_norm", q.product_norm));
            }
        }
    }
    Ok(ExperimentResult {
        rows,
        provenance: provenance(cfg),
    })
}
