mod common;

use common::*;
use lsmm::generator::build_canonical_T;
use lsmm::linalg::{is_controllable, pole_place_siso, solve_sylvester};
use lsmm::linear::{
    assemble_family, check_admissibility, derive_Q, dominant_reduction_pipeline, error_bound,
    index_J, moments_from_pi, solve_pi, solve_relaxed, surrogate_generator, surrogate_model,
};
use lsmm::{Condition, Error, Mat, ReducedModel, ReductionParams, Row, StateSpace, Vector, C64};
use proptest::prelude::*;

fn model_from(f: Mat, g: Vector, h: Row) -> ReducedModel {
    let r = f.nrows();
    ReducedModel {
        f,
        g,
        h,
        p: Mat::zeros(r, 0),
        delta: None,
        q: None,
        spectrum_clash: false,
    }
}

fn assert_close(a: &Mat, b: &Mat, tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.shape(), b.shape());
    let d = (a - b).abs().max();
    prop_assert!(d <= tol, "max elementwise difference {d:e}");
    Ok(())
}

proptest! {
    #![proptest_config(proptest_config(48))]

    #[test]
    fn index_equals_moment_error_sum(
        seed in any::<u64>(), n in 1usize..9, nu in 1usize..9, r in 1usize..4,
    ) {
        let mut rg = rng(seed);
        let sys = random_stable_system(&mut rg, n);
        let g = random_general_generator(&mut rg, nu.max(2));
        let model = random_stable_system(&mut rg, r);
        let model = model_from(model.a, model.b, model.c);
        let j = index_J(&sys, &g, &model);
        prop_assume!(j.is_ok());
        let j = j.unwrap();
        let chains = build_canonical_T(&g).unwrap().chains;
        let oracle = moment_error_sum(&sys, &model.as_state_space(), &chains);
        prop_assert!((j - oracle).abs() <= 1e-8 * oracle.max(1e-300), "{j:e} vs {oracle:e}");
    }

    #[test]
    fn moments_read_off_the_sylvester_solution(seed in any::<u64>(), n in 1usize..9) {
        let mut rg = rng(seed);
        let sys = random_stable_system(&mut rg, n);
        let g = random_general_generator(&mut rg, 8);
        let pi = solve_pi(&sys, &g);
        prop_assume!(pi.is_ok());
        let c_pi = &sys.c * pi.unwrap();
        let form = build_canonical_T(&g).unwrap();
        let got = moments_from_pi(&c_pi, &form);
        let mut want = Vec::new();
        for &(s, k) in &form.chains {
            want.extend(resolvent_moments(&sys.a, &sys.b, &sys.c, s, k));
        }
        let scale = want.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for (x, y) in got.values.iter().zip(&want) {
            prop_assert!((x - y).norm() <= 1e-9 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn family_is_controllable(seed in any::<u64>(), n in 2usize..9, half in 1usize..5, r in 1usize..4) {
        let mut rg = rng(seed);
        let sys = random_stable_system(&mut rg, n);
        let g = random_skew_generator(&mut rg, 2 * half);
        let params = random_admissible_params(&mut rg, &g, r.min(2 * half));
        let model = assemble_family(&sys, &g, &params).unwrap();
        prop_assert!(is_controllable(&model.f, &model.g).unwrap());
    }

    #[test]
    fn rank_deficient_projection_is_uncontrollable(seed in any::<u64>(), half in 2usize..5) {
        let mut rg = rng(seed);
        let g = random_skew_generator(&mut rg, 2 * half);
        let nu = g.nu();
        let mut p = random_mat(&mut rg, 2, nu);
        let c = normal(&mut rg);
        let first = p.row(0).clone_owned();
        p.set_row(1, &(first * c));
        let q = p.clone().pseudo_inverse(1e-12).unwrap();
        let targets = random_separated_spectrum(&mut rg, nu, 0.3, 2.0, 0.2);
        let delta = pole_place_siso(&g.s, &g.l, &targets).unwrap();
        let f = &p * (&g.s - &delta * &g.l) * &q;
        let gg = &p * &delta;
        prop_assert!(!is_controllable(&f, &gg).unwrap());
        let report = check_admissibility(&g, &ReductionParams { p, delta, q }).unwrap();
        prop_assert!(report.violations().contains(&Condition::FullRank));
    }

    #[test]
    fn family_minimises_index_for_fixed_projection(
        seed in any::<u64>(), n in 2usize..9, half in 2usize..5, r in 1usize..4,
    ) {
        let mut rg = rng(seed);
        let sys = random_stable_system(&mut rg, n);
        let g = random_skew_generator(&mut rg, 2 * half);
        let params = random_admissible_params(&mut rg, &g, r);
        let best = assemble_family(&sys, &g, &params).unwrap();
        let j0 = index_J(&sys, &g, &best).unwrap();
        // With [P; L] of full row rank the constraint fixes (F, G), so the
        // remaining freedom is H.
        for _ in 0..50 {
            let h = &best.h + random_row(&mut rg, best.r()) * 10f64.powf(-4.0 * rg_unit(&mut rg));
            let other = model_from(best.f.clone(), best.g.clone(), h);
            let j = index_J(&sys, &g, &other).unwrap();
            prop_assert!(j0 <= j + 1e-12, "{j0:e} > {j:e}");
        }
    }

    #[test]
    fn relaxed_solution_matches_family(
        seed in any::<u64>(), n in 2usize..9, half in 2usize..5, r in 1usize..4,
    ) {
        let mut rg = rng(seed);
        let sys = random_stable_system(&mut rg, n);
        let g = random_skew_generator(&mut rg, 2 * half);
        let params = random_admissible_params(&mut rg, &g, r);
        let mut k = params.p.clone().insert_row(params.p.nrows(), 0.0);
        k.set_row(params.p.nrows(), &g.l);
        // (F, G) are unique only when L is outside the row space of P.
        prop_assume!(lsmm::linalg::rank(&k, 1e-9) == k.nrows());
        let fam = assemble_family(&sys, &g, &params).unwrap();
        let rel = solve_relaxed(&sys, &g, &params.p).unwrap();
        assert_close(&fam.f, &rel.f, 1e-8)?;
        assert_close(
            &Mat::from_column_slice(fam.g.len(), 1, fam.g.as_slice()),
            &Mat::from_column_slice(rel.g.len(), 1, rel.g.as_slice()),
            1e-8,
        )?;
        assert_close(
            &Mat::from_row_slice(1, fam.h.len(), fam.h.as_slice()),
            &Mat::from_row_slice(1, rel.h.len(), rel.h.as_slice()),
            1e-8,
        )?;
    }

    #[test]
    fn two_step_routes_reproduce_family(
        seed in any::<u64>(), n in 2usize..9, half in 2usize..5, r in 1usize..4,
    ) {
        let mut rg = rng(seed);
        let sys = random_stable_system(&mut rg, n);
        let g = random_skew_generator(&mut rg, 2 * half);
        let params = random_admissible_params(&mut rg, &g, r);
        let fam = assemble_family(&sys, &g, &params).unwrap();
        let (p, q, delta) = (&params.p, &params.q, &params.delta);
        // Surrogate model followed by projection.
        let sur = surrogate_model(&sys, &g, delta).unwrap();
        assert_close(&(p * &sur.a * q), &fam.f, 1e-10)?;
        prop_assert!((p * &sur.b - &fam.g).abs().max() <= 1e-10);
        prop_assert!((&sur.c * q - &fam.h).abs().max() <= 1e-10);
        // Projected generator followed by the full-order family.
        let sg = surrogate_generator(&g, p, q).unwrap();
        let pd = p * delta;
        assert_close(&(&sg.s - &pd * &sg.l), &fam.f, 1e-10)?;
        prop_assert!((&pd - &fam.g).abs().max() <= 1e-10);
    }

    #[test]
    fn bound_dominates_index_weighted_norm(
        seed in any::<u64>(), n in 2usize..9, half in 1usize..5, r in 1usize..4,
    ) {
        // |x T|^2 <= |x|^2 |T|_2^2, so J <= bound^2 |T|_2^2.
        let mut rg = rng(seed);
        let sys = random_stable_system(&mut rg, n);
        let g = random_skew_generator(&mut rg, 2 * half);
        let params = random_admissible_params(&mut rg, &g, r.min(2 * half));
        let model = assemble_family(&sys, &g, &params).unwrap();
        let j = index_J(&sys, &g, &model).unwrap();
        let b = error_bound(&sys, &g, &model).unwrap();
        let t = build_canonical_T(&g).unwrap().t;
        let tn = t.svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max);
        prop_assert!(j <= b * b * tn * tn * (1.0 + 1e-10) + 1e-14);
    }
}

fn rg_unit(rg: &mut TestRng) -> f64 {
    use rand::Rng;
    rg.random::<f64>()
}

#[test]
fn exact_matching_collapse() {
    let mut rg = rng(21);
    for _ in 0..20 {
        let sys = random_stable_system(&mut rg, 6);
        let g = random_skew_generator(&mut rg, 4);
        let nu = g.nu();
        let targets = random_separated_spectrum(&mut rg, nu, 0.3, 2.0, 0.2);
        let delta = pole_place_siso(&g.s, &g.l, &targets).unwrap();
        let params = ReductionParams {
            p: Mat::identity(nu, nu),
            delta: delta.clone(),
            q: Mat::identity(nu, nu),
        };
        let model = assemble_family(&sys, &g, &params).unwrap();
        let pi = solve_pi(&sys, &g).unwrap();
        assert_eq!(model.f, &g.s - &delta * &g.l);
        assert_eq!(model.g, delta);
        assert!((&model.h - &sys.c * &pi).norm() <= 1e-14 * model.h.norm());
        let scale = (&sys.c * &pi).norm_squared();
        assert!(index_J(&sys, &g, &model).unwrap() <= 1e-20 * scale.max(1.0));
    }
}

#[test]
fn dual_route_output_needs_invariant_range() {
    // The projected generator reproduces (F, G). Its Sylvester solution gives
    // C Pi_bar = C Pi Q only when Im Q is S-invariant, e.g. for r = nu.
    let mut rg = rng(5);
    let sys = random_stable_system(&mut rg, 5);
    let g = random_skew_generator(&mut rg, 4);
    let params = random_admissible_params(&mut rg, &g, 4);
    let fam = assemble_family(&sys, &g, &params).unwrap();
    let sg = surrogate_generator(&g, &params.p, &params.q).unwrap();
    let pibar = solve_sylvester(&sys.a, &sys.b, &sg.l, &sg.s).unwrap();
    assert!((&sys.c * pibar - &fam.h).norm() <= 1e-10 * fam.h.norm());

    let params = random_admissible_params(&mut rg, &g, 2);
    let fam = assemble_family(&sys, &g, &params).unwrap();
    let sg = surrogate_generator(&g, &params.p, &params.q).unwrap();
    let pibar = solve_sylvester(&sys.a, &sys.b, &sg.l, &sg.s).unwrap();
    let s_q = &g.s * &params.q;
    let invariant = (&s_q - &params.q * &params.p * &s_q).norm() <= 1e-10;
    let same = (&sys.c * pibar - &fam.h).norm() <= 1e-10 * fam.h.norm();
    assert_eq!(invariant, same);
}

#[test]
fn surrogate_errors() {
    let mut rg = rng(8);
    let sys = random_stable_system(&mut rg, 4);
    let g = random_skew_generator(&mut rg, 4);
    assert!(matches!(
        surrogate_model(&sys, &g, &Vector::zeros(4)),
        Err(Error::SpectraOverlap { .. })
    ));
    let p = Mat::identity(2, 4);
    let q = Mat::identity(4, 2) * 2.0;
    assert!(matches!(
        surrogate_generator(&g, &p, &q),
        Err(Error::RankDeficient { .. })
    ));
    let sg = surrogate_generator(&g, &Mat::identity(4, 4), &Mat::identity(4, 4)).unwrap();
    assert_eq!(sg.s, g.s);
    assert_eq!(sg.l, g.l);
}

#[test]
fn relaxed_rejects_non_conditioned_invariant_kernel() {
    let mut rg = rng(13);
    let sys = random_stable_system(&mut rg, 4);
    let g = random_skew_generator(&mut rg, 6);
    let mut p = Mat::zeros(1, 6);
    p[(0, 0)] = 1.0;
    assert!(!lsmm::generator::check_conditioned_invariant(&p, &g.s, &g.l).unwrap());
    assert!(matches!(
        solve_relaxed(&sys, &g, &p),
        Err(Error::NotConditionedInvariant { .. })
    ));
}

#[test]
fn pipeline_keeps_dominant_eigenvalues() {
    let a = Mat::from_diagonal(&Vector::from_vec(vec![-1.0, -2.0, -3.0, -4.0]));
    let sys = StateSpace::new(
        a,
        Vector::from_element(4, 1.0),
        Row::from_row_slice(&[1.0, 1.0, 1.0, 1.0]),
    )
    .unwrap();
    let g = skew_generator(&[1.0, 2.0]);
    let model = dominant_reduction_pipeline(&sys, &g, 2).unwrap();
    let ev = lsmm::linalg::eigenvalues(&model.f).unwrap();
    assert!(spectrum_mismatch(&ev, &[C64::new(-1.0, 0.0), C64::new(-2.0, 0.0)]) <= 1e-9);
    let full = dominant_reduction_pipeline(&sys, &g, 4).unwrap();
    let ev = lsmm::linalg::eigenvalues(&full.f).unwrap();
    let want: Vec<C64> = (1..=4).map(|k| C64::new(-(k as f64), 0.0)).collect();
    assert!(spectrum_mismatch(&ev, &want) <= 1e-9);
}

#[test]
fn admissibility_reports_each_violation() {
    let mut rg = rng(17);
    let g = random_skew_generator(&mut rg, 6);
    let mut params = random_admissible_params(&mut rg, &g, 2);
    assert!(check_admissibility(&g, &params).unwrap().admissible());
    params.q *= 1.5;
    let v = check_admissibility(&g, &params).unwrap().violations();
    assert_eq!(v, vec![Condition::RightInverse]);
    let form = build_canonical_T(&g).unwrap();
    params.q = derive_Q(&params.p, &form).unwrap();
    params.delta = Vector::zeros(6);
    let v = check_admissibility(&g, &params).unwrap().violations();
    assert!(v.contains(&Condition::DeltaInvariant));
}
