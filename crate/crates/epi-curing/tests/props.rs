//! Property suite over randomized instances: reduction identities, spectral
//! characterizations, dynamical invariants, and the two-level boundary
//! geometry. Instances are keyed by a seed so failures shrink to a number.

mod common;

use common::{random_equitable, random_equitable_connected};
use epi_curing::curing::{
    bisection_threshold, left_corner, optimal_threshold_2d, optimal_threshold_2d_with,
    right_corner, CostModel, Effort, TwoLevelInstance, TwoLevelOptions,
};
use epi_curing::netmodel::{build_network, generate_star, CuringVector};
use epi_curing::nimfa::{
    integrate_full, steady_state, uniform_times, IntegrateOptions, SteadyStateMode,
    SteadyStateOptions,
};
use epi_curing::partition::{
    build_quotient, check_equitable, lift_vector, LiftKind, Partition, QuotientModel,
    ReducedCuringVector,
};
use epi_curing::spectral::{
    dominant_eigenpair, is_negative_definite, lambda_max, stability_modulus, NegDefMethod,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quotient_from_seed(seed: u64, directed: bool) -> (common::EquitableInstance, QuotientModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = random_equitable(&mut rng, 6, 40, directed);
    let q = build_quotient(&inst.net, &inst.pi, None, 1e-9).unwrap();
    (inst, q)
}

use common::random_two_level as two_level_from_seed;

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-scale..scale);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn quotient_matches_generated_cell_rates(seed in any::<u64>()) {
        let (inst, q) = quotient_from_seed(seed, true);
        let scale = inst.cell_rates.amax().max(1.0);
        for i in 0..q.n {
            for j in 0..q.n {
                prop_assert!((q.c_out[(i, j)] - inst.cell_rates[(i, j)]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn balance_identity_holds(seed in any::<u64>()) {
        let (_, q) = quotient_from_seed(seed, true);
        let scale = q.c_out.amax().max(1.0) * q.sizes.iter().max().copied().unwrap_or(1) as f64;
        for i in 0..q.n {
            for j in 0..q.n {
                let lhs = q.sizes[i] as f64 * q.c_out[(i, j)];
                let rhs = q.sizes[j] as f64 * q.c_in[(j, i)];
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn commutation_identity_with_cell_constant_curing(seed in any::<u64>()) {
        // (W − D)·Sᵀ = Sᵀ·(Qᵀ − D̄) for cell-constant curing
        let (inst, q) = quotient_from_seed(seed, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1CE);
        let dbar = DVector::from_fn(q.n, |_, _| rng.gen_range(0.0..3.0));
        let d_full = lift_vector(&q, &dbar, LiftKind::PerNode).unwrap();
        let nn = inst.net.n_nodes();
        let mut m_full = inst.net.rates().clone();
        for v in 0..nn {
            m_full[(v, v)] -= d_full[v];
        }
        let mut m_red = q.q_t.clone();
        for i in 0..q.n {
            m_red[(i, i)] -= dbar[i];
        }
        let lhs = &m_full * q.lift.transpose();
        let rhs = q.lift.transpose() * &m_red;
        let scale = m_full.amax().max(1.0);
        prop_assert!((lhs - rhs).amax() <= 1e-12 * scale);
    }

    #[test]
    fn reduced_spectrum_embeds_via_lifted_eigenvectors(seed in any::<u64>()) {
        // undirected draw: Qᵀ − D̄ symmetric, eigenpairs well-defined
        let (inst, q) = quotient_from_seed(seed, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBEEF);
        let dbar = DVector::from_fn(q.n, |_, _| rng.gen_range(0.0..2.0));
        let mut m_red = q.q_t.clone();
        for i in 0..q.n {
            m_red[(i, i)] -= dbar[i];
        }
        let eig = nalgebra::SymmetricEigen::new(m_red.clone());
        let d_full = lift_vector(&q, &dbar, LiftKind::PerNode).unwrap();
        let nn = inst.net.n_nodes();
        let mut m_full = inst.net.rates().clone();
        for v in 0..nn {
            m_full[(v, v)] -= d_full[v];
        }
        let scale = m_full.amax().max(1.0);
        for c in 0..q.n {
            let lambda = eig.eigenvalues[c];
            let xbar = DVector::from_iterator(q.n, eig.eigenvectors.column(c).iter().copied());
            let x = lift_vector(&q, &xbar, LiftKind::Spectral).unwrap();
            let resid = (&m_full * &x - lambda * &x).amax();
            prop_assert!(resid <= 1e-10 * scale, "residual {resid} at eigenvalue {lambda}");
        }
    }

    #[test]
    fn negdef_methods_agree_with_modulus_sign(seed in any::<u64>(), n in 2usize..=30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_symmetric(&mut rng, n, 2.0);
        let r = stability_modulus(&m).unwrap();
        let chol = is_negative_definite(&m, NegDefMethod::Cholesky).unwrap();
        let minors = is_negative_definite(&m, NegDefMethod::LeadingMinors).unwrap();
        // skip the measure-zero boundary where factorization is rounding-bound
        prop_assume!(r.abs() > 1e-9);
        prop_assert_eq!(chol.negative_definite, r < 0.0);
        prop_assert_eq!(minors.negative_definite, r < 0.0);
        prop_assert_eq!(chol.det_sign, minors.det_sign);
    }

    #[test]
    fn leading_eigenvector_strictly_one_signed_on_connected(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_equitable_connected(&mut rng, 6, 40);
        let q = build_quotient(&inst.net, &inst.pi, None, 1e-9).unwrap();
        let mut m = q.q_t.clone();
        for i in 0..q.n {
            m[(i, i)] -= rng.gen_range(0.0..2.0);
        }
        let (_, v) = dominant_eigenpair(&m).unwrap();
        let sign = v[0].signum();
        for x in v.iter() {
            prop_assert!(x.signum() == sign && x.abs() > 1e-12, "eigenvector entry {x}");
        }
    }

    #[test]
    fn zero_curing_entry_pins_lambda1_nonnegative(seed in any::<u64>()) {
        let (_, q) = quotient_from_seed(seed, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
        let mut m = q.q_t.clone();
        let hole = rng.gen_range(0..q.n);
        for i in 0..q.n {
            if i != hole {
                m[(i, i)] -= rng.gen_range(0.0..3.0);
            }
        }
        prop_assert!(lambda_max(&m).unwrap() >= -1e-12);
    }

    #[test]
    fn lambda1_is_lipschitz_in_curing(seed in any::<u64>()) {
        let (_, q) = quotient_from_seed(seed, false);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11F5);
        let d1 = DVector::from_fn(q.n, |_, _| rng.gen_range(0.0..2.0));
        let d2 = DVector::from_fn(q.n, |_, _| rng.gen_range(0.0..2.0));
        let with = |d: &DVector<f64>| {
            let mut m = q.q_t.clone();
            for i in 0..q.n {
                m[(i, i)] -= d[i];
            }
            lambda_max(&m).unwrap()
        };
        let gap = (with(&d1) - with(&d2)).abs();
        let dist = (0..q.n).map(|i| (d1[i] - d2[i]).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= dist + 1e-10);
    }

    #[test]
    fn trajectories_stay_in_unit_cube(seed in any::<u64>()) {
        let (inst, _) = quotient_from_seed(seed, true);
        let nn = inst.net.n_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xCCEE);
        let p0 = DVector::from_fn(nn, |_, _| rng.gen_range(0.0..1.0));
        let delta = CuringVector::new(DVector::from_fn(nn, |_, _| rng.gen_range(0.0..2.0))).unwrap();
        let times = uniform_times(5.0, 20);
        let traj = integrate_full(&inst.net, &delta, &p0, &times, &IntegrateOptions::default()).unwrap();
        for state in traj.states() {
            for &x in state.iter() {
                prop_assert!((0.0..=1.0).contains(&x), "state {x} outside [0,1]");
            }
        }
    }

    #[test]
    fn raising_one_curing_rate_never_increases_prevalence(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_equitable_connected(&mut rng, 5, 24);
        let w = inst.net.rates();
        let nn = inst.net.n_nodes();
        // start comfortably supercritical, then raise one rate
        let base = stability_modulus(w).unwrap();
        let d0 = DVector::from_element(nn, (0.3 * base).max(0.01));
        let opts = SteadyStateOptions::default();
        let prev = |d: &DVector<f64>| {
            let ss = steady_state(w, d, SteadyStateMode::Auto, &opts).unwrap();
            ss.vector.sum() / nn as f64
        };
        let p_before = prev(&d0);
        let mut d1 = d0.clone();
        let bump_at = rng.gen_range(0..nn);
        d1[bump_at] += rng.gen_range(0.1..2.0) * base;
        let p_after = prev(&d1);
        prop_assert!(p_after <= p_before + 1e-9, "{p_after} > {p_before}");
    }

    #[test]
    fn boundary_function_is_decreasing(seed in any::<u64>()) {
        let (tl, _, _, _) = two_level_from_seed(seed);
        let eps = 1e-9 * tl.l_max();
        let (lo, _) = left_corner(&tl, eps).unwrap();
        let (hi, _) = right_corner(&tl, eps).unwrap();
        prop_assume!(hi - lo > 1e-6 * tl.l_max());
        let grid = 7;
        let mut prior = f64::INFINITY;
        for g in 0..=grid {
            let d0 = lo + (hi - lo) * g as f64 / grid as f64;
            let d1 = match bisection_threshold(&tl, d0, eps) {
                Ok(v) => v,
                Err(_) => continue,
            };
            prop_assert!(d1 <= prior + 1e-8 * tl.l_max().max(1.0), "phi not decreasing at {d0}");
            prior = d1;
        }
    }

    #[test]
    fn restricted_cost_is_convex_along_the_boundary(seed in any::<u64>()) {
        let (tl, _, _, _) = two_level_from_seed(seed);
        let eps = 1e-10 * tl.l_max();
        let (lo, _) = left_corner(&tl, eps).unwrap();
        let (hi, _) = right_corner(&tl, eps).unwrap();
        prop_assume!(hi - lo > 1e-4 * tl.l_max());
        let (c_hat0, c_hat1) = tl.c_hats();
        let grid = 8;
        let mut u = Vec::new();
        for g in 0..=grid {
            let d0 = lo + (hi - lo) * g as f64 / grid as f64;
            match bisection_threshold(&tl, d0, eps) {
                Ok(d1) => u.push(c_hat0 * d0 + c_hat1 * d1),
                Err(_) => return Ok(()),
            }
        }
        let scale = u.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        for w in u.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-6 * scale, "second difference negative");
        }
    }

    #[test]
    fn optimum_sits_in_corner_box_on_boundary_and_beats_uniform(seed in any::<u64>()) {
        let (tl, q, c0, c1) = two_level_from_seed(seed);
        let sol = optimal_threshold_2d(&tl, None).unwrap();
        let (d0, d1) = sol.two_level.unwrap();
        let eps = 1e-9 * tl.l_max();
        let (lo, d1_hi) = left_corner(&tl, eps).unwrap();
        let (hi, d1_lo) = right_corner(&tl, eps).unwrap();
        let slack = 1e-7 * tl.l_max().max(1.0);
        prop_assert!(d0 >= lo - slack && d0 <= hi + slack, "delta0 {d0} outside [{lo}, {hi}]");
        prop_assert!(d1 >= d1_lo - slack && d1 <= d1_hi + slack, "delta1 {d1} outside box");
        prop_assert!(sol.certificate.lambda_max.abs() <= 1e-6 * tl.l_max().max(1.0));
        prop_assert!(sol.certificate.negative_semidefinite);
        // uniform policy over the same quotient with the same per-cell costs
        let mut costs = DVector::zeros(q.n);
        for &j in tl.pi0() {
            costs[j] = c0;
        }
        for &j in tl.pi1() {
            costs[j] = c1;
        }
        let cost = CostModel::new(costs, Effort::Linear).unwrap();
        let uni = epi_curing::curing::uniform_policy(&q, &cost).unwrap();
        prop_assert!(sol.cost <= uni.cost + 1e-6 * uni.cost.max(1.0), "2D worse than uniform");
    }

    #[test]
    fn subgradient_methods_agree_in_sign_away_from_optimum(seed in any::<u64>()) {
        let (tl, _, _, _) = two_level_from_seed(seed);
        let sol = optimal_threshold_2d(&tl, None).unwrap();
        let (d0_star, _) = sol.two_level.unwrap();
        let eps = 1e-10 * tl.l_max();
        let (lo, _) = left_corner(&tl, eps).unwrap();
        let (hi, _) = right_corner(&tl, eps).unwrap();
        let width = hi - lo;
        prop_assume!(width > 1e-3 * tl.l_max());
        let (c_hat0, c_hat1) = tl.c_hats();
        let eps1 = 1e-6 * tl.l_max();
        for g in 1..8 {
            let d0 = lo + width * g as f64 / 8.0;
            if (d0 - d0_star).abs() < 0.1 * width || d0 + eps1 >= hi {
                continue;
            }
            let phi0 = match bisection_threshold(&tl, d0, eps) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let phi1 = match bisection_threshold(&tl, d0 + eps1, eps) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let fd = c_hat0 * eps1 + c_hat1 * (phi1 - phi0);
            let analytic = (d0 - d0_star).signum(); // U is convex with minimum at d0_star
            if fd.abs() > 1e-7 * tl.l_max().max(1.0) {
                prop_assert!(fd.signum() == analytic, "FD sign {} vs position sign {} at {}",
                    fd.signum(), analytic, d0);
            }
        }
    }

    #[test]
    fn uniform_lmax_point_is_always_feasible(seed in any::<u64>()) {
        let (_, q) = quotient_from_seed(seed, false);
        let delta = epi_curing::curing::feasible_uniform_point(&q).unwrap();
        let mut m = q.q_t.clone();
        for i in 0..q.n {
            m[(i, i)] -= delta[i];
        }
        prop_assert!(lambda_max(&m).unwrap() <= 1e-12 * q.l_max().max(1.0));
    }
}

#[test]
fn equitability_survives_relabeling_within_cells() {
    // star with a directed ring on the leaves: within-cell structure that is
    // not permutation-invariant as a matrix, yet equitable for any relabeling
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(3..7usize);
        let beta = rng.gen_range(0.5..1.5);
        let ring = rng.gen_range(0.1..0.9);
        let n = k + 1;
        let mut rates = DMatrix::zeros(n, n);
        for leaf in 1..=k {
            rates[(0, leaf)] = beta;
            rates[(leaf, 0)] = beta;
            let next = if leaf == k { 1 } else { leaf + 1 };
            rates[(leaf, next)] = ring;
        }
        // relabel the leaves by a random permutation
        let mut perm: Vec<usize> = (1..=k).collect();
        for i in (1..k).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mut full_perm = vec![0usize];
        full_perm.extend(&perm);
        let relabeled = DMatrix::from_fn(n, n, |i, j| rates[(full_perm[i], full_perm[j])]);
        let net = build_network(relabeled).unwrap();
        let pi = Partition::new(vec![vec![0], (1..=k).collect()], n).unwrap();
        let rep = check_equitable(&net, &pi, 1e-12).unwrap();
        assert!(rep.equitable, "relabeled ring-star not equitable (seed {seed})");
    }
}

#[test]
fn bisection_count_grows_logarithmically_in_tolerance() {
    let (net, pi) = generate_star(4, 1.0).unwrap();
    let q = build_quotient(&net, &pi, None, 1e-12).unwrap();
    let tl = TwoLevelInstance::new(q.q_t.clone(), q.sizes.clone(), vec![0], vec![1], 1.0, 1.0)
        .unwrap();
    let run = |eps: f64| {
        optimal_threshold_2d_with(
            &tl,
            &TwoLevelOptions {
                eps_cost: Some(eps),
                ..TwoLevelOptions::default()
            },
        )
        .unwrap()
        .iterations
    };
    let coarse = run(1e-4);
    let fine = run(1e-8);
    assert!(fine <= coarse + 20, "iterations {coarse} -> {fine} not logarithmic");
    assert!(fine <= 120, "iteration count {fine} unexpectedly large");
}

#[test]
fn reduced_and_full_steady_states_agree_on_equitable_instances() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_equitable_connected(&mut rng, 5, 24);
        let q = build_quotient(&inst.net, &inst.pi, None, 1e-9).unwrap();
        let base = stability_modulus(inst.net.rates()).unwrap();
        let dbar = ReducedCuringVector::uniform(q.n, 0.4 * base).unwrap();
        let d_full = lift_vector(&q, dbar.values(), LiftKind::PerNode).unwrap();
        let opts = SteadyStateOptions::default();
        let full = steady_state(inst.net.rates(), &d_full, SteadyStateMode::Auto, &opts).unwrap();
        let red = steady_state(&q.c_out, dbar.values(), SteadyStateMode::Auto, &opts).unwrap();
        let lifted = lift_vector(&q, &red.vector, LiftKind::PerNode).unwrap();
        let gap = (&full.vector - &lifted).amax();
        assert!(gap <= 1e-9, "steady-state mismatch {gap} (seed {seed})");
    }
}
