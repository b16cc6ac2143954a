use std::sync::Arc;

use smp_core::operators::{
    check_structure_condition, CoefficientField, GradientTerm, OperatorSpec, Principal, ScalarField,
    ZeroGradient,
};
use smp_core::symmat::{Ellipticity, Extremal, SymMat};

fn band(l: f64, u: f64) -> Ellipticity {
    Ellipticity::new(l, u).unwrap()
}

fn lower_order() -> CoefficientField {
    CoefficientField {
        b: ScalarField::Wave {
            offset: 1.0,
            amplitude: 0.5,
            frequency: 2.0,
        },
        c: ScalarField::Constant(-0.5),
        gradient: GradientTerm::Plus,
        ..CoefficientField::zero()
    }
}

#[test]
fn catalog_satisfies_structure_condition() {
    let specs = [OperatorSpec::pucci(Extremal::Plus, 3, band(1.0, 2.0))
            .with_coefficients(lower_order())
            .unwrap(),
        OperatorSpec::pucci(Extremal::Minus, 2, band(0.5, 4.0)),
        OperatorSpec::new(
            2,
            Principal::Bellman(vec![SymMat::from_diag(&[1.0, 2.0]), SymMat::from_rows(&[vec![1.5, 0.4], vec![0.4, 1.5]]).unwrap()]),
            band(1.0, 2.0),
            lower_order(),
        )
        .unwrap(),
        OperatorSpec::normalized_p_laplacian(3, 3.0, ZeroGradient::Reject).unwrap(),
        OperatorSpec::normalized_p_laplacian(2, 1.5, ZeroGradient::Reject).unwrap(),
        OperatorSpec::lagrangian_mcf(2, 0.3, 2.0).unwrap(),
        OperatorSpec::lagrangian_mcf(3, 0.2, 1.5).unwrap()];
    for (i, spec) in specs.iter().enumerate() {
        let rep = check_structure_condition(spec, 2000, 2.0, i as u64).unwrap();
        assert!(rep.pass(), "spec {i}: {rep:?}");
    }
}

#[test]
fn cubic_trace_is_caught() {
    let spec = OperatorSpec::new(
        2,
        Principal::Custom {
            name: "tr3".into(),
            f: Arc::new(|m: &SymMat| m.trace().powi(3)),
        },
        band(1.0, 2.0),
        CoefficientField::zero(),
    )
    .unwrap();
    let rep = check_structure_condition(&spec, 1000, 2.0, 3).unwrap();
    assert!(!rep.pass());
}

#[test]
fn understated_band_is_caught() {
    let spec = OperatorSpec::new(
        2,
        Principal::Linear(SymMat::from_diag(&[1.0, 3.0])),
        band(1.0, 2.0),
        CoefficientField::zero(),
    );
    // a constant-coefficient operator outside its declared band is rejected up front
    assert!(spec.is_err());
}
