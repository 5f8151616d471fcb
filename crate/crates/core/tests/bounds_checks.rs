use ctl_core::bounds::{self, Delta1Choice};
use ctl_core::instances;
use ctl_core::numkernel::{self, Matrix};
use ctl_core::riccati;
use ctl_core::sysmodel::{CostSpec, Policy};
use proptest::prelude::*;

fn pascal_row(n: usize) -> Vec<u128> {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![1u128; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn central_binomials_match_pascal(j in 0u32..=60) {
        prop_assert_eq!(bounds::central_binomial(j).unwrap(), pascal_row(2 * j as usize)[j as usize]);
    }

    #[test]
    fn birge_exact_dominates_simplified(delta in 1e-6f64..(1.0 / 3.0)) {
        let b = bounds::birge_threshold(delta).unwrap();
        prop_assert!(b.exact >= b.simplified - 1e-12);
    }

    #[test]
    fn sample_bound_grows_as_coupling_weakens(mu in 0.05f64..0.95, kappa in 2usize..=6, delta in 0.001f64..0.3) {
        let a = bounds::stab_sample_lower_bound(mu, kappa, delta, 1.0).unwrap();
        let b = bounds::stab_sample_lower_bound(mu / 2.0, kappa, delta, 1.0).unwrap();
        prop_assert!(b >= a);
        let ra = bounds::stab_sample_report(mu, kappa, delta, 1.0).unwrap();
        let rb = bounds::stab_sample_report(mu / 2.0, kappa, delta, 1.0).unwrap();
        prop_assert!(rb.intermediate["real_bound"] > ra.intermediate["real_bound"]);
    }
}

#[test]
fn binomial_sums_match_pascal() {
    for n in 2..=30u32 {
        let direct: u128 = (1..n as usize).map(|j| pascal_row(2 * j)[j]).sum();
        assert_eq!(bounds::central_binomial_sum(n).unwrap(), direct);
    }
}

#[test]
fn sample_bound_formula_values() {
    assert_eq!(bounds::stab_sample_lower_bound(0.5, 3, 0.05, 1.0).unwrap(), 16);
    assert_eq!(bounds::stab_sample_lower_bound(0.5, 3, 1.0 / 3.0, 1.0).unwrap(), 0);
    // log(1/0.3) * 8, rounded up
    assert_eq!(bounds::stab_sample_lower_bound(0.5, 3, 0.1, 1.0).unwrap(), 10);
    let b = bounds::birge_threshold(0.05).unwrap();
    assert!((b.exact - 2.6500).abs() < 5e-5);
    assert!((b.simplified - (1.0f64 / 0.15).ln()).abs() < 1e-12);
}

#[test]
fn integrator_exponent_chain_of_inequalities() {
    for n in 3..=10 {
        let q = bounds::integrator_exponent_quantity(n).unwrap();
        assert!(q.numeric >= q.binomial_sum as f64, "n={n}: {q:?}");
        assert!(q.binomial_sum >= q.power, "n={n}: {q:?}");
    }
    assert_eq!(bounds::integrator_exponent_quantity(4).unwrap().binomial_sum, 28);
}

#[test]
fn stable_chain_product_norm_regressions() {
    let pinned = [
        (6, 133854.21662102034),
        (7, 4116336.623255328),
        (8, 132878738.69926731),
        (9, 4432182884.356499),
        (10, 151274042534.55252),
    ];
    for (n, v) in pinned {
        let q = bounds::stable_exponent_quantity(n, 0.5).unwrap();
        assert!(rel(q.product_norm, v) < 1e-8, "n={n}: {} vs {v}", q.product_norm);
    }
}

#[test]
fn stable_chain_product_norm_growth() {
    let logs: Vec<f64> = (6..=10)
        .map(|n| bounds::stable_exponent_quantity(n, 0.5).unwrap().product_norm.log2())
        .collect();
    for w in logs.windows(2).skip(1) {
        assert!(w[1] - w[0] >= 3.5, "{logs:?}");
    }
}

#[test]
fn stable_chain_corner_small_cases() {
    let q4 = bounds::stable_exponent_quantity(4, 0.5).unwrap();
    assert_eq!(q4.lemma_bound, 17.0);
    assert!(q4.riccati_corner >= 17.0);
    let q6 = bounds::stable_exponent_quantity(6, 0.5).unwrap();
    assert_eq!(q6.lemma_bound, 257.0);
    assert!(q6.riccati_corner >= 257.0);
}

#[test]
fn two_subsystem_bound_matches_eigen_oracle() {
    for n in 3..=6 {
        let comp = instances::make_integrator_composite(n).unwrap();
        let x = instances::chain_product_matrix(&comp.subsystem).unwrap();
        let (vals, _) = numkernel::symmetric_eigen(&x).unwrap();
        let oracle = vals.last().unwrap().sqrt() / (4.0 * (n as f64).sqrt());
        let got = bounds::two_subsystem_bound(n, &Delta1Choice::TopEigenvector).unwrap();
        assert!(rel(got, oracle) < 1e-10, "n={n}");
        let floor = 2f64.powf((n as f64 - 2.0) / 2.0) / (4.0 * (n as f64).sqrt());
        assert!(got >= floor);
    }
    let pinned = bounds::two_subsystem_bound(3, &Delta1Choice::TopEigenvector).unwrap();
    assert!(rel(pinned, 0.5373958707607152) < 1e-10);
}

#[test]
fn regret_pair_on_composite() {
    for n in 3..=6 {
        let comp = instances::make_integrator_composite(n).unwrap();
        let cost = CostSpec::identity(n, 2);
        let fl = bounds::regret_f_l(&comp.sys, &cost, &comp.delta).unwrap();
        let x = instances::chain_product_matrix(&comp.subsystem).unwrap();
        assert!(rel(fl.f, 0.5 * x.quad_form(&comp.delta1)) < 1e-9, "n={n}");
        assert!(fl.l <= n as f64 * (1.0 + 1e-12));
        let zero = bounds::regret_f_l(&comp.sys, &cost, &Matrix::zeros(n, 2)).unwrap();
        assert_eq!((zero.f, zero.bound), (0.0, 0.0));
    }
}

#[test]
fn gain_derivative_matches_finite_difference() {
    let h = 1e-5;
    for n in 3..=6 {
        let comp = instances::make_integrator_composite(n).unwrap();
        let cost = CostSpec::identity(n, 2);
        let k0 = riccati::solve_dare(&comp.sys, &cost).unwrap().k_star;
        let k_at = |theta: f64| {
            let fam = instances::theta_member(&comp.sys, &comp.delta, &k0, theta).unwrap();
            riccati::solve_dare(&fam.system, &cost).unwrap().k_star
        };
        let fd = (&k_at(h) - &k_at(-h)).scale(0.5 / h);
        let d = bounds::gain_derivative(&comp.sys, &cost, &comp.delta).unwrap();
        assert!((&fd - &d).frobenius_norm() <= 1e-6 * d.frobenius_norm(), "n={n}");
    }
}

#[test]
fn trajectory_kl_envelope_grid() {
    for n in 2..=6 {
        for &mu in &[0.1, 0.25, 0.4, 0.5, 0.6] {
            for &alpha in &[0.0, 0.2, 0.35] {
                if alpha + mu >= 1.0 {
                    continue;
                }
                let pair = instances::make_stab_pair(n, mu, alpha).unwrap();
                for horizon in [1, 5, 20, 60] {
                    let a = bounds::traj_kl_analytic(&pair, 1.0, horizon);
                    let e = bounds::traj_kl_envelope(&pair, 1.0, horizon);
                    assert!(a <= e * (1.0 + 1e-12), "n={n} mu={mu} alpha={alpha} N={horizon}: {a} > {e}");
                }
            }
        }
    }
}

#[test]
fn trajectory_kl_before_excitation_arrives() {
    let pair = instances::make_stab_pair(5, 0.5, 0.0).unwrap();
    for horizon in 0..4 {
        assert_eq!(bounds::traj_kl_analytic(&pair, 1.0, horizon), 0.0);
    }
    let two = instances::make_stab_pair(2, 0.5, 0.0).unwrap();
    assert!((bounds::traj_kl_analytic(&two, 1.0, 10) - 1.125).abs() < 1e-12);
}

#[test]
fn trajectory_kl_estimator_converges() {
    let pair = instances::make_stab_pair(3, 0.5, 0.0).unwrap();
    let pol = Policy::white_noise(1.0);
    let small = bounds::traj_kl_s1_s2(&pair, &pol, 20, 1_000, 4).unwrap();
    let large = bounds::traj_kl_s1_s2(&pair, &pol, 20, 100_000, 4).unwrap();
    for kl in [&small, &large] {
        assert!((kl.mc - kl.analytic).abs() <= 4.0 * kl.stderr, "{kl:?}");
    }
    let ratio = small.stderr / large.stderr;
    assert!((7.0..14.0).contains(&ratio), "stderr ratio {ratio}");
}
