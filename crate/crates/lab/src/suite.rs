//! Numerical verification of the structural bounds: one pass/fail row per
//! (lemma, instance) carrying both sides of the inequality.

use ctl_core::bounds;
use ctl_core::ctrbl;
use ctl_core::instances;
use ctl_core::learnpipe;
use ctl_core::numkernel::{self, Matrix};
use ctl_core::riccati;
use ctl_core::sysmodel::{substream_seed, CostSpec, GaussianStream};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::result::{ExperimentResult, Provenance, Row};
use crate::LabError;

/// Horizon used for the trajectory KL rows when the grid gives none.
pub const DEFAULT_KL_HORIZON: usize = 20;
const JURY_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    /// Multiplies the measured coupling before it enters the bounds. Values
    /// above 1 overstate the coupling and shrink the Gramian bound's margin
    /// by `scale^(2 + 2 kappa)`.
    pub mu_scale: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { mu_scale: 1.0 }
    }
}

fn check(label: &str, params: &[(&str, f64)], lhs: f64, rhs: f64, pass: bool, seed: u64) -> Row {
    let mut all: Vec<(&str, f64)> = params.to_vec();
    all.push(("lhs", lhs));
    all.push(("rhs", rhs));
    Row::new(label, &all, "pass", if pass { 1.0 } else { 0.0 }).stats(0.0, 1).seeded(seed)
}

/// Rows for one random robustly coupled instance: the Gramian lower bound,
/// the Riccati upper bound and both closed-loop margin bounds.
pub fn random_instance_rows(n: usize, p: usize, instance: usize, seed: u64, opts: &SuiteOptions) -> Result<Vec<Row>, LabError> {
    let sys = instances::random_coupled(n, p, seed)?;
    let mut report = ctrbl::analyze(&sys)?;
    report.mu *= opts.mu_scale;
    let params = [("n", n as f64), ("p", p as f64), ("instance", instance as f64)];
    let mut rows = Vec::with_capacity(4);

    let g = ctrbl::gramian_bound_from_report(&report);
    let with_kappa = [params[0], params[1], params[2], ("kappa", report.kappa as f64)];
    rows.push(check("gramian_lower_bound", &with_kappa, g.lhs, g.rhs, g.holds, seed));

    let cost = CostSpec::identity(n, p);
    let sol = riccati::solve_dare(&sys, &cost)?;
    let p_norm = numkernel::spectral_norm(&sol.p)?;
    let upper = riccati::riccati_upper_bound(&report, &cost)?;
    rows.push(check("riccati_upper_bound", &params, p_norm, upper, p_norm <= upper, seed));

    let mb = riccati::margin_bounds(&sol)?;
    rows.push(check(
        "closed_loop_radius_bound",
        &params,
        sol.closed_loop_radius,
        mb.radius_bound,
        sol.closed_loop_radius <= mb.radius_bound,
        seed,
    ));
    let hinf = learnpipe::hinf_norm(&sys.closed_loop(&sol.k_star)?, None)?;
    rows.push(check("hinf_margin_bound", &params, hinf, mb.hinf_bound, hinf <= mb.hinf_bound, seed));
    Ok(rows)
}

fn jury_row(n: usize, mu: f64, draw: usize, seed: u64) -> Result<Row, LabError> {
    let pair = instances::make_stab_pair(n, mu, 0.0)?;
    let mut g = GaussianStream::new(seed);
    let k = Matrix::row(&g.normal_vec(n, 1.0));
    let (phi1, phi2) = learnpipe::jury_phi1(&pair, &k)?;
    let expected = -k[(0, 0)] * mu.powi(n as i32);
    let pass = (phi1 - expected).abs() <= 1e-10 * expected.abs() && (phi1 + phi2).abs() <= 1e-12 * (1.0 + phi1.abs());
    Ok(check("jury_identity", &[("n", n as f64), ("mu", mu), ("draw", draw as f64)], phi1, expected, pass, seed))
}

pub fn run_lemma_suite_with(cfg: &ExperimentConfig, opts: &SuiteOptions) -> Result<ExperimentResult, LabError> {
    if cfg.kind != ExperimentKind::LemmaSuite {
        return Err(LabError::Config {
            path: "kind".into(),
            message: format!("expected LemmaSuite, got {:?}", cfg.kind),
        });
    }
    let g = &cfg.grid;
    let trials = cfg.trials as usize;
    let kl_horizons = if g.samples.is_empty() { vec![DEFAULT_KL_HORIZON] } else { g.samples.clone() };
    let mut rows = Vec::new();
    for (cell, &n) in g.n.iter().enumerate() {
        let cell_seed = substream_seed(cfg.base_seed, cell as u64);
        let per_instance: Vec<Vec<Row>> = (0..trials)
            .into_par_iter()
            .map(|j| random_instance_rows(n, 1 + j % n, j, substream_seed(cell_seed, j as u64), opts))
            .collect::<Result<_, _>>()?;
        rows.extend(per_instance.into_iter().flatten());

        if n >= 3 {
            let q = bounds::integrator_exponent_quantity(n)?;
            let pass = q.numeric >= q.binomial_sum as f64 && q.binomial_sum >= q.power;
            rows.push(check(
                "integrator_exponent",
                &[("n", n as f64), ("power", q.power as f64)],
                q.numeric,
                q.binomial_sum as f64,
                pass,
                cell_seed,
            ));
        }
        if n >= 4 {
            for &rho in &g.rho {
                let q = bounds::stable_exponent_quantity(n, rho)?;
                rows.push(check(
                    "stable_corner",
                    &[("n", n as f64), ("rho", rho)],
                    q.riccati_corner,
                    q.lemma_bound,
                    q.riccati_corner >= q.lemma_bound,
                    cell_seed,
                ));
            }
        }
        for &mu in &g.mu {
            for draw in 0..trials {
                rows.push(jury_row(n, mu, draw, substream_seed(cell_seed, JURY_STREAM + draw as u64))?);
            }
            let pair = instances::make_stab_pair(n, mu, 0.0)?;
            for &horizon in &kl_horizons {
                let a = bounds::traj_kl_analytic(&pair, 1.0, horizon);
                let e = bounds::traj_kl_envelope(&pair, 1.0, horizon);
                rows.push(check(
                    "kl_envelope",
                    &[("n", n as f64), ("mu", mu), ("N", horizon as f64)],
                    a,
                    e,
                    a <= e,
                    cell_seed,
                ));
            }
        }
    }
    Ok(ExperimentResult {
        rows,
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.base_seed,
        },
    })
}

pub fn run_lemma_suite(cfg: &ExperimentConfig) -> Result<ExperimentResult, LabError> {
    run_lemma_suite_with(cfg, &SuiteOptions::default())
}

/// Every pass/fail row passed.
pub fn suite_passed(result: &ExperimentResult) -> bool {
    result.rows.iter().filter(|r| r.metric == "pass").all(|r| r.value == 1.0)
}

/// Failing rows, for reporting.
pub fn failures(result: &ExperimentResult) -> impl Iterator<Item = &Row> {
    result.rows.iter().filter(|r| r.metric == "pass" && r.value != 1.0)
}
