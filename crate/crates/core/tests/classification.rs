use poptlab_core::fixtures::{generate, Generated, GeneratorKind, GeneratorSpec};
use poptlab_core::jordan::{
    classify, is_completely_positive, map_from_state, orientation_of, ClassifyConfig, LinearMapRep, OperatorMap,
    OrientationTag, Verdict,
};
use poptlab_core::operator::{is_psd, partial_transpose_hermitian, HermitianOperator, Subsystem};
use poptlab_core::random::{ginibre_density, seeded, unit_trace_hermitian, unit_vector};

#[test]
fn regression_matrix_matches_declared_classes() {
    let kinds = [
        "haar_pure",
        "ginibre_mixed",
        "ginibre_mixed(2)",
        "max_entangled",
        "swap_popt",
        "pt_of(max_entangled)",
        "pt_of(haar_pure)",
        "pt_of(swap_popt)",
        "werner(0)",
        "werner(0.9)",
    ];
    let cfg = ClassifyConfig::default();
    for kind in kinds {
        for d in [3, 4] {
            let spec = GeneratorSpec::new(kind.parse().unwrap(), (d, d), 11);
            let Generated::State { rho, certificate, .. } = generate(&spec).unwrap() else {
                panic!("{kind} should generate a state")
            };
            let report = classify(rho.matrix(), (d, d), &cfg).unwrap();
            assert_eq!(report.verdict, certificate.expected_class, "{kind} at d = {d}");
        }
    }
    for kind in ["haar_pure", "ginibre_mixed", "pt_of(haar_pure)"] {
        let spec = GeneratorSpec::new(kind.parse().unwrap(), (3, 4), 12);
        let g = generate(&spec).unwrap();
        let report = classify(g.state().unwrap().matrix(), (3, 4), &cfg).unwrap();
        let Generated::State { certificate, .. } = g else {
            unreachable!()
        };
        assert_eq!(report.verdict, certificate.expected_class, "{kind} at (3, 4)");
    }
}

#[test]
fn report_invariants_hold() {
    let cfg = ClassifyConfig::default();
    let mut rng = seeded(13);
    for _ in 0..10 {
        let rho = unit_trace_hermitian(&mut rng, 9);
        let r = classify(rho.matrix(), (3, 3), &cfg).unwrap();
        match r.verdict {
            Verdict::QuantumState => assert_eq!(r.is_psd, Some(true)),
            Verdict::PoptOnly => assert!(r.is_popt == Some(true) && r.is_psd == Some(false)),
            Verdict::NotPopt => assert_eq!(r.is_popt, Some(false)),
            Verdict::Invalid => panic!("valid input classified invalid"),
        }
    }
}

#[test]
fn positivity_matches_complete_positivity_of_the_twisted_map() {
    let mut rng = seeded(14);
    for k in 0..100 {
        let rho = if k % 2 == 0 {
            ginibre_density(&mut rng, 9, 1 + k % 9)
        } else {
            unit_trace_hermitian(&mut rng, 9)
        };
        let phi = map_from_state(&rho, (3, 3)).unwrap();
        let twisted = phi.compose_transpose();
        let cp = is_psd(&twisted.standard_choi(), 1e-9).unwrap().is_psd;
        assert_eq!(is_psd(&rho, 1e-9).unwrap().is_psd, cp);
        assert_eq!(is_completely_positive(&phi, 1e-9).unwrap().is_psd, cp);
    }
}

fn npt_state(seed: u64) -> HermitianOperator {
    HermitianOperator::ket_bra(&unit_vector(&mut seeded(seed), 9))
}

#[test]
fn single_flip_toggles_and_double_flip_restores() {
    let cfg = ClassifyConfig {
        samples: 20,
        ..Default::default()
    };
    for seed in 0..8 {
        let rho = npt_state(200 + seed);
        let tag = orientation_of(&rho, (3, 3), &cfg).unwrap();
        assert_eq!(tag, OrientationTag::Preserving);
        for side in [Subsystem::First, Subsystem::Second] {
            let flipped = partial_transpose_hermitian(&rho, (3, 3), side).unwrap();
            assert_eq!(orientation_of(&flipped, (3, 3), &cfg).unwrap(), tag.flipped());
        }
        let both = partial_transpose_hermitian(
            &partial_transpose_hermitian(&rho, (3, 3), Subsystem::First).unwrap(),
            (3, 3),
            Subsystem::Second,
        )
        .unwrap();
        assert_eq!(orientation_of(&both, (3, 3), &cfg).unwrap(), tag);
    }
}

#[test]
fn ppt_states_keep_their_orientation_under_a_single_flip() {
    // both ρ and ρ^{T₁} are states, so both lift to homomorphisms
    let cfg = ClassifyConfig {
        samples: 20,
        ..Default::default()
    };
    let rho = HermitianOperator::identity(9).scale(1.0 / 9.0);
    let pt = partial_transpose_hermitian(&rho, (3, 3), Subsystem::First).unwrap();
    assert_eq!(orientation_of(&rho, (3, 3), &cfg).unwrap(), OrientationTag::Preserving);
    assert_eq!(orientation_of(&pt, (3, 3), &cfg).unwrap(), OrientationTag::Preserving);
}

#[test]
fn non_popt_operators_have_no_lift() {
    let (rho, _, _) = poptlab_core::fixtures::planted_non_popt(3, 3, 2.0, 15).unwrap();
    let r = classify(rho.matrix(), (3, 3), &Default::default()).unwrap();
    assert_eq!(r.verdict, Verdict::NotPopt);
    if r.is_ppt == Some(false) {
        assert!(r.lift.is_none() && r.jordan_defect.is_none());
    }
}

#[test]
fn transpose_map_is_reported_in_choi_form() {
    let t = LinearMapRep::transpose(3);
    assert_eq!(t.d_in(), 3);
    assert!(is_completely_positive(&t, 1e-9).unwrap().is_psd);
    assert!(!is_psd(&t.standard_choi(), 1e-9).unwrap().is_psd);
}

#[test]
fn generated_kinds_parse_from_cli_strings() {
    let k: GeneratorKind = "pt_of(ginibre_mixed(3))".parse().unwrap();
    assert_eq!(k.to_string(), "pt_of(ginibre_mixed(3))");
}
