use ctl_core::ctrbl;
use ctl_core::instances;
use ctl_core::numkernel::{self, Matrix};
use ctl_core::riccati;
use ctl_core::sysmodel::{CostSpec, GaussianStream, LinearSystem};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=8).prop_flat_map(|n| (Just(n), 1usize..=n, any::<u64>()))
}

fn random_orthogonal(n: usize, seed: u64) -> Matrix {
    let mut g = GaussianStream::new(seed);
    let m = Matrix::from_fn(n, n, |_, _| g.standard_normal());
    numkernel::qr(&m).unwrap().0
}

/// Average cost of a stabilizing gain, through the closed-loop covariance.
fn average_cost(sys: &LinearSystem, cost: &CostSpec, k: &Matrix) -> f64 {
    let sigma = riccati::closed_loop_covariance(sys, k).unwrap();
    let w = &cost.q + &(&(&k.transpose() * &cost.r) * k);
    (&w * &sigma).trace()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn index_is_invariant_under_rotation((n, p, seed) in dims()) {
        let sys = instances::random_coupled(n, p, seed).unwrap();
        let u = random_orthogonal(n, seed ^ 0x5555);
        let rotated = sys.transform(&u).unwrap();
        prop_assert_eq!(
            ctrbl::controllability_index(&sys).unwrap(),
            ctrbl::controllability_index(&rotated).unwrap()
        );
    }

    #[test]
    fn rank_profile_is_monotone((n, p, seed) in dims()) {
        let sys = instances::random_coupled(n, p, seed).unwrap();
        let ranks = ctrbl::rank_profile(&sys).unwrap();
        for w in ranks.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert_eq!(*ranks.last().unwrap(), n);
    }

    #[test]
    fn gramian_least_singular_value_is_square_of_ctrb((n, p, seed) in dims()) {
        let sys = instances::random_coupled(n, p, seed).unwrap();
        let rep = ctrbl::analyze(&sys).unwrap();
        let direct = *numkernel::singular_values(&ctrbl::gramian(&sys, rep.kappa).unwrap()).unwrap().last().unwrap();
        let top = numkernel::spectral_norm(&rep.gramian).unwrap();
        prop_assert!((direct - rep.sigma_min_gramian).abs() <= 1e-10 * top);
    }

    #[test]
    fn staircase_is_an_orthogonal_similarity((n, p, seed) in dims()) {
        let sys = instances::random_coupled(n, p, seed).unwrap();
        let form = ctrbl::staircase(&sys).unwrap();
        let u = &form.u;
        let eye = Matrix::identity(n);
        prop_assert!((&(&u.transpose() * u) - &eye).max_abs() < 1e-12);
        let a_hat = &(&u.transpose() * sys.a()) * u;
        prop_assert!((&a_hat - &form.a_hat).max_abs() < 1e-12);
        prop_assert!(form.pattern_defect() <= 1e-10 * sys.bound_m());
        prop_assert_eq!(form.block_sizes.iter().sum::<usize>(), n);
        prop_assert_eq!(form.block_sizes.len(), ctrbl::controllability_index(&sys).unwrap());
    }

    #[test]
    fn gramian_and_riccati_bounds_hold((n, p, seed) in dims()) {
        let sys = instances::random_coupled(n, p, seed).unwrap();
        let rep = ctrbl::analyze(&sys).unwrap();
        let check = ctrbl::gramian_bound_from_report(&rep);
        prop_assert!(check.holds, "{check:?}");
        let cost = CostSpec::identity(n, p);
        let sol = riccati::solve_dare(&sys, &cost).unwrap();
        let pn = numkernel::spectral_norm(&sol.p).unwrap();
        prop_assert!(pn <= riccati::riccati_upper_bound(&rep, &cost).unwrap());
    }

    #[test]
    fn dare_fixed_point_and_optimality((n, p, seed) in dims(), bump in prop::collection::vec(-1.0f64..1.0, 64)) {
        let sys = instances::random_coupled(n, p, seed).unwrap();
        let cost = CostSpec::identity(n, p);
        let sol = riccati::solve_dare(&sys, &cost).unwrap();
        let stepped = riccati::riccati_step(&sol.p, &sys, &cost).unwrap();
        prop_assert!((&stepped - &sol.p).frobenius_norm() <= 1e-9 * (1.0 + sol.p.frobenius_norm()));
        prop_assert!(sol.closed_loop_radius < 1.0);
        prop_assert!(numkernel::is_psd(&sol.p, 1e-10).unwrap());

        let j_star = riccati::average_cost_from(&sol, &sys);
        prop_assert!((average_cost(&sys, &cost, &sol.k_star) - j_star).abs() <= 1e-8 * (1.0 + j_star));
        let dk = Matrix::from_fn(p, n, |i, j| bump[(i * n + j) % bump.len()] * 1e-3);
        let k = &sol.k_star + &dk;
        if numkernel::spectral_radius(&sys.closed_loop(&k).unwrap()).unwrap() < 1.0 {
            prop_assert!(average_cost(&sys, &cost, &k) >= j_star * (1.0 - 1e-10));
        }
    }

    #[test]
    fn dare_is_monotone_in_state_weight((n, p, seed) in dims(), extra in 0.0f64..3.0) {
        let sys = instances::random_coupled(n, p, seed).unwrap();
        let base = CostSpec::identity(n, p);
        let heavier = CostSpec::stage(
            &base.q + &Matrix::identity(n).scale(extra),
            base.r.clone(),
        ).unwrap();
        let p1 = riccati::solve_dare(&sys, &base).unwrap().p;
        let p2 = riccati::solve_dare(&sys, &heavier).unwrap().p;
        prop_assert!(numkernel::is_psd(&(&p2 - &p1).symmetrize(), 1e-8 * (1.0 + p2.max_abs())).unwrap());
    }

    #[test]
    fn margin_bounds_hold((n, p, seed) in dims()) {
        let sys = instances::random_coupled(n, p, seed).unwrap();
        let sol = riccati::solve_dare(&sys, &CostSpec::identity(n, p)).unwrap();
        let mb = riccati::margin_bounds(&sol).unwrap();
        prop_assert!(sol.closed_loop_radius <= mb.radius_bound);
    }
}

#[test]
fn golden_ratio_gain() {
    let sys = LinearSystem::new(Matrix::diag(&[1.0]), Matrix::diag(&[1.0]), Matrix::diag(&[1.0])).unwrap();
    let sol = riccati::solve_dare(&sys, &CostSpec::identity(1, 1)).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((sol.p[(0, 0)] - phi).abs() < 1e-9);
    assert!((sol.k_star[(0, 0)] + phi / (1.0 + phi)).abs() < 1e-9);
    assert!((riccati::optimal_average_cost(&sys, &CostSpec::identity(1, 1)).unwrap() - phi).abs() < 1e-9);
}

#[test]
fn lyapunov_rearrangement_on_integrator_subsystem() {
    for n in 3..=7 {
        let comp = instances::make_integrator_composite(n).unwrap();
        let sub = &comp.subsystem.sys;
        let sol = riccati::solve_dare(sub, &CostSpec::identity(sub.n(), sub.p())).unwrap();
        let f = sub.closed_loop(&sol.k_star).unwrap();
        let sigma = riccati::closed_loop_covariance(sub, &sol.k_star).unwrap();
        let lhs = &sigma - &Matrix::identity(sub.n());
        let rhs = &(&f * &sigma) * &f.transpose();
        assert!((&lhs - &rhs).max_abs() <= 1e-9 * (1.0 + sigma.max_abs()), "n={n}");
    }
}
