use poptlab_core::dilation::{orthomorphism_check, stinespring_dilate};
use poptlab_core::jordan::{jordan_defect, map_from_state, orientation_verdict, OrientationTag};
use poptlab_core::measures::{check_no_disturbance, check_no_signalling, OperatorMeasure, ProductMeasure, SamplePlan};
use poptlab_core::operator::{partial_transpose_hermitian, Subsystem};
use poptlab_core::random::{ginibre_density, seeded, unit_trace_hermitian};

#[test]
fn states_pass_the_whole_chain() {
    let mut rng = seeded(300);
    for k in 0..25 {
        let rho = ginibre_density(&mut rng, 9, 1 + k % 3);
        let phi_t = map_from_state(&rho, (3, 3)).unwrap().compose_transpose();
        let dil = stinespring_dilate(&phi_t, true).unwrap();
        assert!(dil.residual <= 1e-8);
        let rep = dil.representation().unwrap();
        assert!(orthomorphism_check(&rep, 20, k as u64, 1e-8).unwrap().passed);
        assert!(jordan_defect(&rep, 20, k as u64) <= 1e-8);
        let o = orientation_verdict(&rep, 20, k as u64, 1e-8).unwrap();
        assert_eq!(o.tag, OrientationTag::Preserving);
        assert!(o.finite_time.agrees);

        // twisting one side turns the lift into an anti-homomorphism
        let pt = partial_transpose_hermitian(&rho, (3, 3), Subsystem::First).unwrap();
        let dil = stinespring_dilate(&map_from_state(&pt, (3, 3)).unwrap(), true).unwrap();
        let rev = dil.representation().unwrap().reversed();
        let twisted = map_from_state(&pt, (3, 3)).unwrap().compose_transpose();
        let a = poptlab_core::random::gue(&mut rng, 3);
        let compressed = dil.compress(&poptlab_core::jordan::OperatorMap::apply_matrix(&rev, a.matrix()));
        let direct = poptlab_core::jordan::OperatorMap::apply_matrix(&twisted, a.matrix());
        assert!((&compressed - &direct).max_norm() <= 1e-8);
        assert!(orthomorphism_check(&rev, 20, k as u64, 1e-8).unwrap().passed);
        assert!(jordan_defect(&rev, 20, k as u64) <= 1e-8);
        assert_eq!(
            orientation_verdict(&rev, 20, k as u64, 1e-8).unwrap().tag,
            OrientationTag::Reversing
        );
    }
}

#[test]
fn operator_backed_measures_satisfy_all_constraints() {
    let mut rng = seeded(301);
    for (k, dims) in [(3, 3), (3, 4), (4, 4)].into_iter().enumerate() {
        let rho = unit_trace_hermitian(&mut rng, dims.0 * dims.1);
        let mu = ProductMeasure::OperatorBacked(OperatorMeasure::new(rho, dims).unwrap());
        let plan = SamplePlan {
            contexts: 60,
            seed: k as u64,
            structured: true,
        };
        assert!(check_no_signalling(&mu, &plan, 1e-10).unwrap().satisfied);
        assert!(check_no_disturbance(&mu, &plan, 1e-10).unwrap().satisfied);
    }
}

#[test]
fn optimized_chsh_matches_its_settings() {
    use poptlab_core::bell::{chsh_value, optimize_chsh, ChshInstance};
    let mut rng = seeded(302);
    for dims in [(2, 2), (2, 3), (3, 3)] {
        let rho = ginibre_density(&mut rng, dims.0 * dims.1, 2);
        let opt = optimize_chsh(&rho, dims, 4, 1).unwrap();
        let settings: [_; 4] = opt.settings.clone().try_into().unwrap();
        let direct = chsh_value(&ChshInstance::new(rho, dims, settings).unwrap());
        assert!(opt.value <= direct + 1e-10 && direct.abs() <= 4.0);
    }
}
