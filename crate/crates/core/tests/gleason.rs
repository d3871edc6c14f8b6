use poptlab_core::measures::{gleason_extend, OperatorMeasure, ReconstructionOptions};
use poptlab_core::operator::is_psd;
use poptlab_core::random::{ginibre_density, seeded, unit_trace_hermitian};
use poptlab_core::Error;

#[test]
fn roundtrip_on_random_hermitian_operators() {
    let mut rng = seeded(100);
    let mut non_psd = 0;
    for k in 0..100 {
        let rho = if k % 2 == 0 {
            unit_trace_hermitian(&mut rng, 9)
        } else {
            ginibre_density(&mut rng, 9, 1 + k % 9)
        };
        if !is_psd(&rho, 1e-9).unwrap().is_psd {
            non_psd += 1;
        }
        let m = OperatorMeasure::new(rho.clone(), (3, 3)).unwrap();
        let rec = gleason_extend(|a, b| m.eval(a, b), (3, 3), &ReconstructionOptions::default()).unwrap();
        let err = (rec.rho.matrix() - rho.matrix()).max_norm();
        assert!(err <= 1e-8, "instance {k}: error {err:e}");
    }
    assert!(non_psd >= 40);
}

#[test]
fn rectangular_roundtrip() {
    let rho = unit_trace_hermitian(&mut seeded(101), 12);
    let m = OperatorMeasure::new(rho.clone(), (4, 3)).unwrap();
    let rec = gleason_extend(|a, b| m.eval(a, b), (4, 3), &Default::default()).unwrap();
    assert!((rec.rho.matrix() - rho.matrix()).max_norm() <= 1e-8);
}

#[test]
fn unnormalized_oracle_is_inconsistent() {
    let rho = ginibre_density(&mut seeded(102), 9, 9).scale(2.0);
    let oracle = |a: &poptlab_core::operator::Projection, b: &poptlab_core::operator::Projection| {
        Ok(rho
            .expectation(&poptlab_core::operator::tensor(a.matrix(), b.matrix()))
            .re)
    };
    assert!(matches!(
        gleason_extend(oracle, (3, 3), &Default::default()),
        Err(Error::InconsistentOracle { .. })
    ));
}
