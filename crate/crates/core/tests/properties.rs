mod common;

use common::*;
use num_traits::Signed;
use prp_core::cohomology::{
    check_tangent, cone_membership_relative, tangent_prp_space, tangent_relative, DeformationContext,
};
use prp_core::instance::parse_instance;
use prp_core::linalg::{frobenius, identity, inverse, CMatrix, FlagType, HermitianMetric, C64};
use prp_core::metric::{gauge_compare, gauge_compare_solutions, solve_metric, SolverOptions};
use prp_core::quiver::{check_locus, decode, encode, induced_weight, king_semistable, KingStatus};
use prp_core::rep_pair::{invariance_defect, validate, WeightedPair};
use prp_core::rhd::{deligne_residue, extension_degree, rhd_twist, verify_monodromy};
use prp_core::sampling::{random_pair, rng};
use prp_core::stability::{semistable, StabilityStatus};
use prp_core::subspaces::SearchBudget;
use proptest::prelude::*;

fn random_unitary(g: &mut rand_chacha::ChaCha8Rng, r: usize) -> CMatrix {
    random_square(g, r).qr().q()
}

fn random_metric(g: &mut rand_chacha::ChaCha8Rng) -> HermitianMetric {
    let a = random_square(g, 2);
    HermitianMetric::new(identity(2) + &a * a.adjoint()).unwrap()
}

#[test]
fn example_pair_lies_on_the_quiver_locus() {
    let inst = parse_instance(&corpus("example_2_3_solution")).unwrap();
    let x = encode(&inst.pair).unwrap();
    check_locus(&x).unwrap();
    let back = decode(&x).unwrap();
    assert!(validate(&back).valid);
    for (a, b) in back.images().iter().zip(inst.pair.images()) {
        assert!(frobenius(&(a - b)) < 1e-12);
    }
}

#[test]
fn irreducible_pairs_are_king_stable() {
    let mut g = rng(11);
    for (genus, n, r) in [(0, 3, 2), (1, 1, 3), (1, 2, 2), (2, 1, 2)] {
        let pair = irreducible_pair(&mut g, genus, n, r);
        let wp = random_weighted(&mut g, pair);
        let x = encode(&wp.pair).unwrap();
        let w = induced_weight(&wp.weights, &wp.pair.flag_types()).unwrap();
        let k = king_semistable(&x, &w, &SearchBudget::default()).unwrap();
        assert_eq!(k.status, KingStatus::Stable);
        assert_eq!(k.total_pairing, 0.into());
    }
}

#[test]
fn stability_matches_king_for_nonzero_degree() {
    let mut g = rng(12);
    let budget = SearchBudget::default();
    let mut unstable = 0;
    for k in 0..30 {
        let r = 2 + k % 2;
        let pair = if k % 2 == 0 { triangular_pair(&mut g, 1, 2, r) } else { diagonal_pair(&mut g, 0, 3, r) };
        let wp = random_weighted(&mut g, pair);
        let s = semistable(&wp, &budget).unwrap();
        let x = encode(&wp.pair).unwrap();
        let w = induced_weight(&wp.weights, &wp.pair.flag_types()).unwrap();
        let kv = king_semistable(&x, &w, &budget).unwrap();
        assert_eq!(s.status.is_semistable(), kv.is_semistable(), "instance {k}");
        if s.status == StabilityStatus::Unstable {
            unstable += 1;
            let u = &kv.witness.as_ref().unwrap().spaces[0];
            assert!(invariance_defect(&wp.pair, u) < 1e-8);
            assert!(kv.witness_pairing.unwrap().is_positive());
        }
    }
    assert!(unstable > 0);
}

#[test]
fn tangent_vectors_satisfy_their_conditions() {
    let mut g = rng(13);
    let pair = irreducible_pair(&mut g, 1, 2, 2);
    let ctx = DeformationContext::new(&pair).unwrap();
    let t = tangent_prp_space(&ctx);
    assert_eq!(t.dimension, 4 * 3);
    for v in &t.basis {
        check_tangent(&ctx, v).unwrap();
    }
    let rel = tangent_relative(&ctx);
    for x in &rel.basis {
        let m = cone_membership_relative(x, &ctx).unwrap();
        assert_eq!(cone_membership_relative(&x.scaled(-4.0), &ctx).unwrap(), m);
    }
}

fn degree_zero_stable(seed: u64) -> WeightedPair {
    let mut g = rng(seed);
    let pair = irreducible_pair(&mut g, 0, 3, 2);
    let w = degree_zero_weights(&mut g, &pair);
    WeightedPair::new(pair, w).unwrap()
}

#[test]
fn metric_solver_is_deterministic_and_unitarily_equivariant() {
    let wp = degree_zero_stable(14);
    let opts = SolverOptions::default();
    let a = solve_metric(&wp, &opts).unwrap();
    let b = solve_metric(&wp, &opts).unwrap();
    let (a, b) = (a.converged().unwrap(), b.converged().unwrap());
    assert_eq!(a.step_count, b.step_count);
    assert_eq!(a.h.gram(), b.h.gram());

    // Conjugating by a unitary u moves the solution to u^{-*} h u^{-1}, and the pullback
    // by u brings it back into the same gauge class.
    let u = random_unitary(&mut rng(15), 2);
    let conj = wp.conjugate(&u).unwrap();
    let c = solve_metric(&conj, &opts).unwrap();
    let c = c.converged().unwrap();
    assert!(c.total_norm < 1e-8);
    let pulled = c.h.pullback(&u).unwrap();
    let cmp = gauge_compare(&a.h, &pulled, &wp.pair).unwrap();
    assert!(cmp.g.is_some(), "residual {}", cmp.residual);
    let same = gauge_compare_solutions(&wp, a, b, 1e-8).unwrap();
    assert!(same.g.is_some());
}

#[test]
fn gauge_compare_recovers_parabolic_pullbacks() {
    let mut g = rng(16);
    // One full flag: the parabolic acts transitively, so any two metrics are related.
    let pair = random_pair(&mut g, 1, &[FlagType::full(2)]).unwrap();
    let h = random_metric(&mut g);
    let frame = pair.flags()[0].level(1);
    let mut p = identity(2);
    p.set_column(0, &frame.column(0));
    let b = p.clone() * CMatrix::from_row_slice(2, 2, &[C64::new(1.3, 0.2), C64::new(0.4, -0.1), C64::new(0.0, 0.0), C64::new(0.7, 0.0)]) * inverse(&p).unwrap();
    let h2 = h.pullback(&inverse(&b).unwrap()).unwrap();
    let cmp = gauge_compare(&h, &h2, &pair).unwrap();
    let found = cmp.g.expect("a parabolic gauge exists");
    assert!(frobenius(&(found.adjoint() * h2.gram() * &found - h.gram())) < 1e-8);

    // Three generic full flags: the common parabolic is small and a random metric is unrelated.
    let mixed = random_pair(&mut g, 0, &vec![FlagType::full(2); 3]).unwrap();
    let other = random_metric(&mut g);
    assert!(gauge_compare(&h, &other, &mixed).unwrap().g.is_none());
}

#[test]
fn unstable_pairs_diverge() {
    let mut g = rng(17);
    let mut seen = 0;
    for _ in 0..20 {
        let pair = diagonal_pair(&mut g, 0, 3, 2);
        let w = degree_zero_weights(&mut g, &pair);
        let wp = WeightedPair::new(pair, w).unwrap();
        if semistable(&wp, &SearchBudget::default()).unwrap().status != StabilityStatus::Unstable {
            continue;
        }
        seen += 1;
        let out = solve_metric(&wp, &SolverOptions::default()).unwrap();
        assert!(out.diverged().is_some());
    }
    assert!(seen > 0);
}

#[test]
fn residues_are_conjugation_equivariant() {
    let mut g = rng(18);
    for r in 1..=3 {
        let m = identity(r) + random_square(&mut g, r) * C64::new(0.5, 0.0);
        let p = identity(r) + random_square(&mut g, r) * C64::new(0.3, 0.0);
        let pinv = inverse(&p).unwrap();
        let a = deligne_residue(&m).unwrap();
        let b = deligne_residue(&(&p * &m * &pinv)).unwrap();
        assert!(frobenius(&(&p * &a.residue * &pinv - &b.residue)) < 1e-9);
        assert!((extension_degree(&[a]) - extension_degree(&[b])).abs() < 1e-9);
    }
}

#[test]
fn twists_compose_and_undo() {
    let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(-1.0, 0.0), C64::new(0.0, 2.0), C64::new(3.0, 0.0)]));
    let d = deligne_residue(&m).unwrap();
    let k = d.blocks.len();
    let up = rhd_twist(&d, &vec![2; k]).unwrap();
    let back = rhd_twist(&up, &vec![-2; k]).unwrap();
    assert!(back.is_normalized());
    assert!(frobenius(&(back.residue - &d.residue)) < 1e-12);
    assert!((extension_degree(&[up.clone()]) - extension_degree(&[d.clone()]) - 6.0).abs() < 1e-12);
    assert!(verify_monodromy(&up, &m).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residue_round_trip_on_triangular_monodromies(
        a in 0.2f64..3.0, b in 0.2f64..3.0, ta in 0.0f64..6.28, tb in 0.0f64..6.28, x in -2.0f64..2.0, n in -3i64..=3,
    ) {
        let m = CMatrix::from_row_slice(2, 2, &[
            C64::from_polar(a, ta), C64::new(x, 0.0),
            C64::new(0.0, 0.0), C64::from_polar(b, tb),
        ]);
        let d = deligne_residue(&m).unwrap();
        prop_assert!(verify_monodromy(&d, &m).unwrap());
        let shifts = vec![n; d.blocks.len()];
        let t = rhd_twist(&d, &shifts).unwrap();
        prop_assert!(verify_monodromy(&t, &m).unwrap());
        let change = extension_degree(&[t]) - extension_degree(&[d]);
        prop_assert!((change - 2.0 * n as f64).abs() < 1e-9);
    }

    #[test]
    fn induced_weights_pair_to_zero(seed in 0u64..500) {
        let mut g = rng(seed);
        let pair = irreducible_pair(&mut g, 0, 3, 3);
        let wp = random_weighted(&mut g, pair);
        let x = encode(&wp.pair).unwrap();
        let w = induced_weight(&wp.weights, &wp.pair.flag_types()).unwrap();
        prop_assert_eq!(w.pairing(&x.dims.0), 0.into());
    }
}
