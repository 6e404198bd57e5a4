//! Cross-module invariants: analytic gradients against the
//! finite-difference oracle, Hessian-vector identities, objective
//! monotonicity, ascent/descent inequalities on closed forms, and
//! distributional sanity of the random split.

use ofmu_core::data::{gen_blobs, split_classwise, split_random};
use ofmu_core::fd::{default_step, fd_grad, hvp};
use ofmu_core::metrics::{overall_score, spearman};
use ofmu_core::objective::{
    cosine_sim, grad_penalty_objective, penalty_objective, GradMethod, ObjectiveContext,
    DEFAULT_SIM_FLOOR,
};
use ofmu_core::optimizer::{run_ofmu, OfmuConfig};
use ofmu_core::problem::{DifferentiableProblem, LabeledBatch, LossKind};
use ofmu_core::vector::ParameterVector;
use ofmu_core::verify::{
    check_lemma1, check_lemma2, random_instance, well_conditioned_instance,
};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_err(a: &ParameterVector, b: &ParameterVector) -> f64 {
    a.sub(b).norm() / a.norm().max(b.norm()).max(1e-12)
}

fn random_batch(rng: &mut ChaCha8Rng, size: usize, dim: usize, classes: usize) -> LabeledBatch {
    let inputs: Vec<f64> = (0..size * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels: Vec<usize> = (0..size).map(|_| rng.random_range(0..classes)).collect();
    LabeledBatch::new(inputs, labels, dim).unwrap()
}

fn random_theta(rng: &mut ChaCha8Rng, dim: usize) -> ParameterVector {
    ParameterVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn families() -> Vec<DifferentiableProblem> {
    vec![
        DifferentiableProblem::linear_regression(4, 3).unwrap(),
        DifferentiableProblem::logistic_regression(5, 4).unwrap(),
        DifferentiableProblem::mlp(vec![3, 6, 4], LossKind::CrossEntropy).unwrap(),
        DifferentiableProblem::mlp(vec![3, 5, 2], LossKind::MeanSquaredError).unwrap(),
    ]
}

#[test]
fn analytic_gradients_match_finite_differences_across_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for problem in families() {
        for _ in 0..25 {
            let theta = random_theta(&mut rng, problem.param_dim());
            let batch = random_batch(&mut rng, 6, problem.feature_dim(), problem.class_count());
            let analytic = problem.grad(&theta, &batch).unwrap();
            let numeric = fd_grad(
                |t| problem.eval_loss(t, &batch),
                &theta,
                default_step(&theta),
            )
            .unwrap();
            let err = rel_err(&analytic, &numeric);
            assert!(
                err <= 1e-5,
                "family {:?}: gradient mismatch {err}",
                problem.family()
            );
        }
    }
}

#[test]
fn eval_and_grad_are_bitwise_deterministic() {
    let problem = DifferentiableProblem::mlp(vec![4, 7, 3], LossKind::CrossEntropy).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let theta = random_theta(&mut rng, problem.param_dim());
    let batch = random_batch(&mut rng, 9, 4, 3);
    assert_eq!(
        problem.eval_loss(&theta, &batch).unwrap().to_bits(),
        problem.eval_loss(&theta, &batch).unwrap().to_bits()
    );
    assert_eq!(
        problem.grad(&theta, &batch).unwrap(),
        problem.grad(&theta, &batch).unwrap()
    );
}

#[test]
fn hvp_is_linear_in_the_direction_on_quadratics() {
    // g(θ) = Aθ for a fixed symmetric A: H = A exactly.
    let a_rows = [[2.0, 0.5, 0.0], [0.5, 3.0, -0.2], [0.0, -0.2, 1.5]];
    let grad = |t: &ParameterVector| {
        Ok(ParameterVector::new(
            a_rows
                .iter()
                .map(|row| row.iter().zip(t.as_slice()).map(|(a, x)| a * x).sum())
                .collect(),
        )
        .unwrap())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let theta = random_theta(&mut rng, 3);
        let u = random_theta(&mut rng, 3);
        let w = random_theta(&mut rng, 3);
        let (alpha, beta): (f64, f64) = (rng.random_range(0.1..2.0), rng.random_range(-2.0..2.0));
        let mut combo = u.scaled(alpha);
        combo.add_scaled(beta, &w);
        if combo.norm() < 1e-6 {
            continue;
        }
        let left = hvp(&grad, &theta, &combo, 1e-6).unwrap();
        let hu = hvp(&grad, &theta, &u, 1e-6).unwrap();
        let hw = hvp(&grad, &theta, &w, 1e-6).unwrap();
        let mut right = hu.scaled(alpha);
        right.add_scaled(beta, &hw);
        let bound = 1e-4 * (alpha.abs() * u.norm() + beta.abs() * w.norm());
        assert!(
            left.sub(&right).norm() <= bound,
            "linearity violated: {} > {bound}",
            left.sub(&right).norm()
        );
    }
}

#[test]
fn hvp_is_symmetric_on_quadratics() {
    let a_rows = [[4.0, 1.0], [1.0, 2.0]];
    let grad = |t: &ParameterVector| {
        Ok(ParameterVector::new(
            a_rows
                .iter()
                .map(|row| row.iter().zip(t.as_slice()).map(|(a, x)| a * x).sum())
                .collect(),
        )
        .unwrap())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let theta = random_theta(&mut rng, 2);
        let v = random_theta(&mut rng, 2);
        let w = random_theta(&mut rng, 2);
        if v.norm() < 1e-6 || w.norm() < 1e-6 {
            continue;
        }
        let hv = hvp(&grad, &theta, &v, 1e-6).unwrap();
        let hw = hvp(&grad, &theta, &w, 1e-6).unwrap();
        let lhs = w.dot(&hv);
        let rhs = v.dot(&hw);
        assert!(
            (lhs - rhs).abs() <= 1e-4 * lhs.abs().max(rhs.abs()).max(1.0),
            "symmetry violated: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn penalty_gradient_matches_finite_differences_of_penalty_value() {
    let problem = DifferentiableProblem::logistic_regression(2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for trial in 0..8 {
        let method = if trial % 2 == 0 {
            GradMethod::FdExact
        } else {
            GradMethod::FirstOrderSurrogate
        };
        let theta = random_theta(&mut rng, problem.param_dim());
        let batch_f = random_batch(&mut rng, 4, 2, 3);
        let batch_r = random_batch(&mut rng, 4, 2, 3);
        let ctx =
            ObjectiveContext::new(&problem, &batch_f, &batch_r, 0.3, DEFAULT_SIM_FLOOR).unwrap();
        let rho = 0.5;
        let analytic = grad_penalty_objective(&ctx, &theta, rho, method).unwrap();
        // The nested probes put the noise floor of F around 1e-8, so
        // the outer difference step is coarser than the default.
        let numeric = fd_grad(
            |t| penalty_objective(&ctx, t, rho, method),
            &theta,
            1e-3,
        )
        .unwrap();
        let err = rel_err(&analytic, &numeric);
        assert!(err <= 1e-3, "{method:?} mismatch {err}");
    }
}

#[test]
fn penalty_value_is_monotone_in_rho() {
    let problem = DifferentiableProblem::logistic_regression(2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let theta = random_theta(&mut rng, problem.param_dim());
    let batch_f = random_batch(&mut rng, 5, 2, 2);
    let batch_r = random_batch(&mut rng, 5, 2, 2);
    let ctx = ObjectiveContext::new(&problem, &batch_f, &batch_r, 0.2, DEFAULT_SIM_FLOOR).unwrap();
    let mut previous = f64::NEG_INFINITY;
    for rho in [0.0, 0.1, 0.5, 1.0, 5.0, 100.0] {
        let f = penalty_objective(&ctx, &theta, rho, GradMethod::FirstOrderSurrogate).unwrap();
        assert!(f >= previous, "F decreased when rho grew");
        previous = f;
    }
}

#[test]
fn inner_ascent_is_monotone_under_the_step_size_hypothesis() {
    for seed in 0..10 {
        let inst = random_instance(5, seed);
        let eta = 0.95 / inst.lipschitz();
        let mut theta =
            ParameterVector::new((0..5).map(|i| (i as f64) / 2.0 - 1.0).collect()).unwrap();
        let mut value = inst.phi(&theta);
        for _ in 0..30 {
            let g = inst.grad_phi(&theta);
            theta.add_scaled(eta, &g);
            let next = inst.phi(&theta);
            assert!(
                next >= value - 1e-12,
                "seed {seed}: ascent decreased phi {value} → {next}"
            );
            value = next;
        }
    }
}

#[test]
fn outer_descent_does_not_increase_the_penalty_objective() {
    for seed in 0..10 {
        let inst = random_instance(5, seed + 100);
        let rho = 0.7;
        let eta_in = 0.5 / inst.lipschitz();
        let eta_out = 0.95 / inst.penalty_lipschitz(rho);
        let mut theta =
            ParameterVector::new((0..5).map(|i| 1.0 - (i as f64) / 3.0).collect()).unwrap();
        for _ in 0..20 {
            // inner phase
            let mut theta_in = theta.clone();
            for _ in 0..4 {
                let g = inst.grad_phi(&theta_in);
                theta_in.add_scaled(eta_in, &g);
            }
            let before = inst.penalty_value(&theta_in, rho);
            let mut next = theta_in.clone();
            next.add_scaled(-eta_out, &inst.grad_penalty(&theta_in, rho));
            let after = inst.penalty_value(&next, rho);
            assert!(
                after <= before + 1e-12,
                "seed {seed}: outer step raised F {before} → {after}"
            );
            theta = next;
        }
    }
}

#[test]
fn lemma2_holds_on_a_quick_random_sweep() {
    for seed in 0..20 {
        let inst = random_instance(8, seed);
        let eta = 0.95 / inst.lipschitz();
        let theta0 = ParameterVector::new((0..8).map(|i| (i as f64 - 4.0) / 3.0).collect()).unwrap();
        for steps in [1usize, 5, 25] {
            let report = check_lemma2(&inst, &theta0, steps, eta).unwrap();
            assert!(report.pass, "seed {seed} T={steps}");
        }
    }
}

#[test]
fn lemma1_residuals_strictly_decrease_when_centers_differ() {
    // Strict decrease holds for any SPD pair; the 1e-4 tail at ρ = 1e4
    // additionally needs the instance constant ‖A_φ⁻¹A_r·Δc‖ near one,
    // which the well-conditioned bank guarantees.
    for seed in 0..20 {
        let inst = random_instance(6, seed);
        let report = check_lemma1(&inst, &[0.5, 1.0, 5.0, 50.0, 1e4]).unwrap();
        for w in report.residuals.windows(2) {
            assert!(w[1] < w[0], "seed {seed}: residuals {:?}", report.residuals);
        }
    }
    for seed in 0..20 {
        let inst = well_conditioned_instance(6, seed);
        let report = check_lemma1(&inst, &[0.5, 1.0, 5.0, 50.0, 1e4]).unwrap();
        assert!(
            report.pass,
            "seed {seed}: residuals {:?}",
            report.residuals
        );
    }
}

#[test]
fn trajectory_replay_is_exact() {
    let data = gen_blobs(3, 4, 15, 2, 6.0).unwrap();
    let split = split_classwise(&data, &[1]).unwrap();
    let problem = DifferentiableProblem::logistic_regression(2, 4).unwrap();
    let mut cfg = OfmuConfig::new(123);
    cfg.outer_iters = 4;
    cfg.inner_steps = 3;
    cfg.batch_size = 8;
    cfg.grad_method = GradMethod::FirstOrderSurrogate;
    let theta0 = problem.init_theta(7);
    let first = run_ofmu(&problem, &split, &theta0, &cfg).unwrap();
    let replay = run_ofmu(&problem, &split, &theta0, &cfg).unwrap();
    assert_eq!(first, replay);
    assert_eq!(
        first.final_theta.as_slice(),
        replay.final_theta.as_slice()
    );
}

#[test]
fn random_split_inclusion_frequency_is_binomial_plausible() {
    let data = gen_blobs(0, 2, 50, 2, 5.0).unwrap(); // |D| = 100
    let fraction = 0.1;
    let seeds = 1000u64;
    let mut counts = vec![0u32; data.len()];
    for seed in 0..seeds {
        let split = split_random(&data, fraction, seed).unwrap();
        for &i in &split.forget_indices {
            counts[i] += 1;
        }
    }
    let expected = seeds as f64 * fraction;
    let sd = (seeds as f64 * fraction * (1.0 - fraction)).sqrt();
    // 100 simultaneous 3σ checks are expected to produce ~0.3 false
    // alarms; allow one, and hold every index to 4σ.
    let mut outside_3sd = 0;
    for (i, &c) in counts.iter().enumerate() {
        let dev = (c as f64 - expected).abs();
        assert!(
            dev <= 4.0 * sd,
            "index {i} appeared {c} times; expected {expected} ± {}",
            4.0 * sd
        );
        if dev > 3.0 * sd {
            outside_3sd += 1;
        }
    }
    assert!(outside_3sd <= 1, "{outside_3sd} indices beyond 3σ");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_similarity_is_scale_invariant(
        g1 in prop::collection::vec(-10.0f64..10.0, 3),
        g2 in prop::collection::vec(-10.0f64..10.0, 3),
        alpha in 0.001f64..1000.0,
    ) {
        let a = ParameterVector::new(g1).unwrap();
        let b = ParameterVector::new(g2).unwrap();
        prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
        let base = cosine_sim(&a, &b, DEFAULT_SIM_FLOOR).unwrap();
        let scaled = cosine_sim(&a.scaled(alpha), &b, DEFAULT_SIM_FLOOR).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&base));
    }

    #[test]
    fn spearman_is_invariant_under_monotone_transforms(
        xs_raw in prop::collection::vec(-1000i32..1000, 5..20),
        ys_raw in prop::collection::vec(-1000i32..1000, 5..20),
    ) {
        prop_assume!(xs_raw.len() == ys_raw.len());
        // Integer-valued data keeps the transforms injective in f64
        // (a rounded exp/log would merge near-equal values and
        // legitimately change ranks) and produces plenty of ties.
        let xs: Vec<f64> = xs_raw.iter().map(|&v| v as f64).collect();
        let ys: Vec<f64> = ys_raw.iter().map(|&v| v as f64).collect();
        let base = spearman(&xs, &ys);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let tx: Vec<f64> = xs.iter().map(|v| 3.0 * v + 7.0).collect();
        let ty: Vec<f64> = ys.iter().map(|v| v * v * v).collect();
        let t = spearman(&tx, &ty).unwrap();
        prop_assert!((base - t).abs() <= 1e-12);
        // self correlation
        let own = spearman(&xs, &xs).unwrap();
        prop_assert!((own - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn overall_score_ignores_column_rescaling(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..5.0, 3), 1..5),
        scale in 0.01f64..100.0,
    ) {
        let base = overall_score(&rows).unwrap();
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r[1] *= scale;
                r
            })
            .collect();
        let rescored = overall_score(&scaled).unwrap();
        for (a, b) in base.iter().zip(&rescored) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for v in base {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }
}
