use num_complex::Complex64;
use proptest::prelude::*;
use sgphase::fock::{
    hermite_functions, make_coherent, make_squeezed_vacuum, quadrature_density, quadrature_distribution,
    DensityMatrix, FockState, QuadratureGrid,
};
use sgphase::quadrature::trapezoid;

fn random_state(re: &[f64], im: &[f64]) -> FockState {
    let raw: Vec<Complex64> = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    FockState::from_amplitudes(raw.iter().map(|c| c / norm).collect()).unwrap()
}

#[test]
fn hermite_functions_are_orthonormal() {
    let grid = QuadratureGrid::symmetric(14.0, 5601).unwrap();
    let rows: Vec<Vec<f64>> = grid.points().iter().map(|&x| hermite_functions(40, x)).collect();
    for n in 0..=40 {
        for m in n..=40 {
            let v: Vec<f64> = rows.iter().map(|r| r[n] * r[m]).collect();
            let want = if n == m { 1.0 } else { 0.0 };
            assert!((trapezoid(&v, grid.spacing()) - want).abs() < 1e-10, "({n},{m})");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadrature_distributions_are_normalized(
        re in prop::collection::vec(-1.0f64..1.0, 8),
        im in prop::collection::vec(-1.0f64..1.0, 8),
        phi in 0.0f64..(2.0 * std::f64::consts::PI),
    ) {
        prop_assume!(re.iter().chain(&im).any(|v| v.abs() > 0.1));
        let rho = DensityMatrix::from(&random_state(&re, &im));
        let grid = QuadratureGrid::symmetric(10.0, 2001).unwrap();
        let p = quadrature_distribution(&rho, phi, &grid).unwrap();
        prop_assert!(p.iter().all(|&v| v >= -1e-15));
        prop_assert!((trapezoid(&p, grid.spacing()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn half_turn_mirrors_quadrature(
        re in prop::collection::vec(-1.0f64..1.0, 6),
        im in prop::collection::vec(-1.0f64..1.0, 6),
        phi in 0.0f64..3.2,
        x in -4.0f64..4.0,
    ) {
        prop_assume!(re.iter().chain(&im).any(|v| v.abs() > 0.1));
        let rho = DensityMatrix::from(&random_state(&re, &im));
        let a = quadrature_density(&rho, phi + std::f64::consts::PI, x);
        let b = quadrature_density(&rho, phi, -x);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn coherent_states_are_normalized(r in 0.0f64..2.5, theta in 0.0f64..6.3) {
        let alpha = Complex64::from_polar(r, theta);
        let s = make_coherent(alpha, 60).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        prop_assert!((s.mean_photon_number() - r * r).abs() < 1e-8);
    }

    #[test]
    fn squeezed_states_have_even_support(r in 0.0f64..0.9, theta in 0.0f64..6.3) {
        let s = make_squeezed_vacuum(Complex64::from_polar(r, theta), 80).unwrap();
        prop_assert!(s.amplitudes().iter().skip(1).step_by(2).all(|c| c.norm() == 0.0));
        prop_assert!((s.mean_photon_number() - r.sinh().powi(2)).abs() < 1e-8);
    }
}
