//! Property-based invariants: algebraic identities of norms and brackets,
//! operator inequalities, solver contracts, conservation laws. Cases are
//! generated through the library's seeded generators so failures replay
//! from the reported seed.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gpme_core::evolution::{evolve, Forcing};
use gpme_core::laplacian::LaplacianContext;
use gpme_core::node_function::{BracketSpace, LpNorm, NodeFunction, UnitMeasure};
use gpme_core::nonlinearity::Nonlinearity;
use gpme_core::oracle;
use gpme_core::resolvent::{solve_finite, ResolventProblem, SolverOptions};
use gpme_core::verification::{
    accretivity_case, bracket_limit_case, commutation_case, comparison_case, contraction_case,
    contractivity_case, mass_case, positivity_case, random_function, random_graph, SignMode,
};

const POWERS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norms_satisfy_axioms(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 12, false, false);
        let u = random_function(&mut rng, &g, SignMode::Any, 3.0);
        let v = random_function(&mut rng, &g, SignMode::Any, 3.0);
        let c: f64 = rng.random_range(-3.0..3.0);
        for p in [LpNorm::L1, LpNorm::L2, LpNorm::LInf] {
            let nu = u.norm(p, &g).unwrap();
            let nv = v.norm(p, &g).unwrap();
            let nsum = u.add_scaled(1.0, &v).norm(p, &g).unwrap();
            prop_assert!(nsum <= nu + nv + 1e-12 * (1.0 + nu + nv));
            let nscaled = u.scaled(c).norm(p, &g).unwrap();
            prop_assert!((nscaled - c.abs() * nu).abs() <= 1e-12 * (1.0 + nu));
            prop_assert!(nu >= 0.0);
        }
    }

    #[test]
    fn bracket_is_bounded_and_positively_homogeneous(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 12, false, false);
        let k = random_function(&mut rng, &g, SignMode::Any, 3.0);
        let z = random_function(&mut rng, &g, SignMode::Any, 3.0);
        let c: f64 = rng.random_range(0.1..4.0);
        let nk = k.norm(LpNorm::L1, &g).unwrap();
        let nz = z.norm(LpNorm::L1, &g).unwrap();
        let b = NodeFunction::bracket_plus(&z, &k, BracketSpace::L1, &g).unwrap();
        prop_assert!(b.abs() <= nk * nz + 1e-12 * (1.0 + nk * nz));
        let bc = NodeFunction::bracket_plus(&z.scaled(c), &k, BracketSpace::L1, &g).unwrap();
        prop_assert!((bc - c * b).abs() <= 1e-10 * (1.0 + b.abs() * c));
        // Against its own direction the bracket is exactly the norm squared.
        if !k.is_zero() {
            let self_b = NodeFunction::bracket_plus(&k, &k, BracketSpace::L1, &g).unwrap();
            prop_assert!((self_b - nk * nk).abs() <= 1e-11 * (1.0 + nk * nk));
        }
    }

    #[test]
    fn bracket_limit_matches_closed_form(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = bracket_limit_case(&mut rng).unwrap();
        prop_assert!(out.monotone);
        prop_assert!(out.relative_error <= 1e-4, "rel err {}", out.relative_error);
    }

    #[test]
    fn green_identity_holds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 15, false, false);
        let v = random_function(&mut rng, &g, SignMode::Any, 3.0);
        let ctx = LaplacianContext::new(&g);
        let rate = ctx.green_mass_rate(&v).unwrap();
        let mut kv = 0.0;
        for i in 0..g.len() {
            kv += g.kappa_at(i) * v.get(g.id_of(i));
        }
        let scale = 1.0 + v.norm(LpNorm::L1, &g).unwrap() * (1.0 + ctx.deg_weighted_sup()) * g.len() as f64;
        prop_assert!((rate - kv).abs() <= 1e-12 * scale, "rate {rate} vs kv {kv}");
    }

    #[test]
    fn linear_laplacian_is_psd(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 15, false, false);
        let v = random_function(&mut rng, &g, SignMode::Any, 3.0);
        let ctx = LaplacianContext::new(&g);
        let lv = ctx.apply(&v).unwrap();
        let quad = NodeFunction::dot_mu(&lv, &v, &g).unwrap();
        let scale = 1.0 + v.norm(LpNorm::L2, &g).unwrap().powi(2) * (1.0 + ctx.deg_weighted_sup());
        prop_assert!(quad >= -1e-11 * scale, "quadratic form {quad}");
    }

    #[test]
    fn delta_phi_differences_have_nonnegative_l1_bracket(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 15, false, false);
        let u = random_function(&mut rng, &g, SignMode::Any, 3.0);
        let v = random_function(&mut rng, &g, SignMode::Any, 3.0);
        let ctx = LaplacianContext::new(&g);
        for m in POWERS {
            let nl = Nonlinearity::power_law(m).unwrap();
            let diff = ctx
                .apply_delta_phi(&nl, &u)
                .unwrap()
                .sub(&ctx.apply_delta_phi(&nl, &v).unwrap());
            let b = NodeFunction::bracket_plus(&diff, &u.sub(&v), BracketSpace::L1, &g).unwrap();
            let scale = 1.0 + diff.norm(LpNorm::L1, &g).unwrap();
            prop_assert!(b >= -1e-10 * scale, "bracket {b} at m={m}");
        }
    }

    #[test]
    fn accretivity_margin_is_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = accretivity_case(&mut rng).unwrap();
        prop_assert!(margin >= -1e-10, "margin {margin}");
    }

    #[test]
    fn dirichlet_restriction_commutes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let disc = commutation_case(&mut rng).unwrap();
        prop_assert!(disc <= 1e-12, "discrepancy {disc}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn resolvent_contracts_data_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = contractivity_case(&mut rng).unwrap();
        prop_assert!(out.norm_margin >= 0.0, "margin {}", out.norm_margin);
        prop_assert!(out.residual_ok);
    }

    #[test]
    fn resolvent_is_a_data_contraction(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 15, false, false);
        let m = POWERS[rng.random_range(0..4)];
        let nl = Nonlinearity::power_law(m).unwrap();
        let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
        let g1 = random_function(&mut rng, &g, SignMode::Any, 2.0);
        let g2 = random_function(&mut rng, &g, SignMode::Any, 2.0);
        let opts = SolverOptions::default();
        let u1 = solve_finite(&ResolventProblem { graph: &g, nl: &nl, lambda, g: &g1 }, &opts)
            .unwrap()
            .u;
        let u2 = solve_finite(&ResolventProblem { graph: &g, nl: &nl, lambda, g: &g2 }, &opts)
            .unwrap()
            .u;
        let du = u1.sub(&u2).norm(LpNorm::L1, &g).unwrap();
        let dg = g1.sub(&g2).norm(LpNorm::L1, &g).unwrap();
        prop_assert!(du <= dg + 1e-8 * (1.0 + dg), "du {du} vs dg {dg}");
    }

    #[test]
    fn resolvent_preserves_signs_strictly(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(positivity_case(&mut rng).unwrap());
    }

    #[test]
    fn comparison_principle_holds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(comparison_case(&mut rng).unwrap());
    }

    #[test]
    fn semigroup_property_of_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 15, false, false);
        let u0 = random_function(&mut rng, &g, SignMode::Any, 2.0);
        let t1: f64 = rng.random_range(0.1..1.0);
        let t2: f64 = rng.random_range(0.1..1.0);
        let op = oracle::assemble_dense(&g).unwrap();
        let two = oracle::expm_apply(&op, t2, &oracle::expm_apply(&op, t1, &u0).unwrap()).unwrap();
        let one = oracle::expm_apply(&op, t1 + t2, &u0).unwrap();
        let d = two.sub(&one).norm(LpNorm::L1, &g).unwrap();
        let scale = 1.0 + u0.norm(LpNorm::L1, &g).unwrap();
        prop_assert!(d <= 1e-9 * scale, "semigroup defect {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_is_conserved(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drift = mass_case(&mut rng).unwrap();
        prop_assert!(drift <= 1e-8, "drift {drift}");
    }

    #[test]
    fn trajectories_satisfy_contraction_estimate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gap = contraction_case(&mut rng).unwrap();
        prop_assert!(gap <= 1e-8, "gap {gap}");
    }

    #[test]
    fn evolution_steps_meet_residual_contract(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 15, false, false);
        let m = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let nl = Nonlinearity::power_law(m).unwrap();
        let u0 = random_function(&mut rng, &g, SignMode::Any, 2.0);
        let f = Forcing::Constant(random_function(&mut rng, &g, SignMode::Any, 1.0));
        let r = evolve(&g, &nl, &u0, &f, 1.0, 0.25, &SolverOptions::default()).unwrap();
        let scale = 1.0
            + u0.norm(LpNorm::L1, &g).unwrap()
            + r.discretization.f_samples[0].norm(LpNorm::L1, &g).unwrap();
        for (k, d) in r.per_step.iter().enumerate() {
            prop_assert!(d.residual_l1 <= 1e-8 * scale, "step {k} residual {}", d.residual_l1);
        }
        prop_assert_eq!(r.states.len(), r.per_step.len() + 1);
    }
}

#[test]
fn unit_measure_and_graph_measures_agree_when_mu_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = random_graph(&mut rng, 10, true, true);
    let v = random_function(&mut rng, &g, SignMode::Any, 2.0);
    let n_graph = v.norm(LpNorm::L1, &g).unwrap();
    let mut plain = 0.0;
    for i in 0..g.len() {
        plain += v.get(g.id_of(i)).abs() * g.mu_at(i);
    }
    assert!((n_graph - plain).abs() <= 1e-12 * (1.0 + plain));
    let n_unit = v.norm(LpNorm::L1, &UnitMeasure).unwrap();
    assert!(n_unit >= 0.0);
}
