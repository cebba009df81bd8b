use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use sgphase::fock::{DensityMatrix, QuadratureGrid, StateSpec};
use sgphase::homodyne::{generate_dataset, phase_rng};
use sgphase::kernel::{KernelSpec, KernelTable};
use sgphase::phase::{coarse_phase_distribution, PhaseKind};
use sgphase::sampler::{
    estimate_distribution, kernel_for_dataset, plug_in_distribution, reconstruct_density_matrix,
    reconstruct_density_matrix_exact, ExactQuadrature,
};

#[test]
fn exact_reconstruction_of_coherent_states() {
    for alpha in [Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, 0.7)] {
        let rho = DensityMatrix::from(&StateSpec::coherent(alpha).build().unwrap());
        let r = reconstruct_density_matrix_exact(&rho, 6, ExactQuadrature::default()).unwrap();
        for n in 0..=6 {
            for m in 0..=6 {
                assert!((r[(n, m)] - rho.get(n, m)).norm() < 1e-5, "alpha={alpha} ({n},{m})");
            }
        }
    }
}

#[test]
fn plug_in_matches_coarse_distributions() {
    let rho = DensityMatrix::from(&StateSpec::coherent(Complex64::new(1.0, 0.0)).build().unwrap());
    for kind in [PhaseKind::Cosine, PhaseKind::Sine] {
        let grid = kind.grid(101);
        let a = plug_in_distribution(&rho, kind, 0.4, &grid, None, ExactQuadrature::default()).unwrap();
        let b = coarse_phase_distribution(&rho, kind, 0.4, &grid, None).unwrap();
        assert!(a.sup_distance(&b) < 1e-4, "{kind:?}: {:e}", a.sup_distance(&b));
    }
}

#[test]
fn reconstruction_from_data() {
    let d = generate_dataset(&StateSpec::vacuum(), 30, 10_000, 1.0, 5).unwrap();
    let r = reconstruct_density_matrix(&d, 2).unwrap();
    let e = r[(0, 0)];
    assert!((e.value.re - 1.0).abs() < 3.0 * e.std_error_re, "{:?}", e);
    for n in 0..=2 {
        for m in 0..=2 {
            assert_eq!(r[(n, m)].value, r[(m, n)].value.conj());
        }
    }

    // the phase of rho_01 = conj(alpha) e^{-|alpha|^2} follows alpha
    let alpha = Complex64::from_polar(0.8, 1.1);
    let d = generate_dataset(&StateSpec::coherent(alpha), 30, 5_000, 1.0, 6).unwrap();
    let r = reconstruct_density_matrix(&d, 1).unwrap();
    let want = alpha.conj() * (-alpha.norm_sqr()).exp();
    let e = r[(0, 1)];
    assert!((e.value.re - want.re).abs() < 4.0 * e.std_error_re, "{e:?} vs {want}");
    assert!((e.value.im - want.im).abs() < 4.0 * e.std_error_im, "{e:?} vs {want}");
}

#[test]
fn estimate_is_order_free() {
    let d = generate_dataset(&StateSpec::coherent(Complex64::new(1.0, 0.0)), 5, 400, 1.0, 8).unwrap();
    let kind = PhaseKind::Sine;
    let grid = kind.grid(101);
    let (kt, _) = kernel_for_dataset(&d, kind, 0.4, &grid, None, None).unwrap();
    let a = estimate_distribution(&d, kind, 0.4, &grid, &kt).unwrap();
    let mut shuffled = d.clone();
    shuffled.records.shuffle(&mut phase_rng(1, 0));
    let b = estimate_distribution(&shuffled, kind, 0.4, &grid, &kt).unwrap();
    assert_eq!(a.distribution, b.distribution);
    assert_eq!(a.raw_means, b.raw_means);
    assert!((a.distribution.integral() - 1.0).abs() < 1e-12);
}

#[test]
fn vacuum_estimate_at_fine_coarse_graining() {
    // for the vacuum only n = m = 0 contributes, so the normalized
    // coarse-grained cosine distribution is (2/pi) sin^2 phi for every eps
    let d = generate_dataset(&StateSpec::vacuum(), 64, 5_000, 1.0, 10).unwrap();
    let kind = PhaseKind::Cosine;
    let grid = kind.grid(101);
    let (kt, _) = kernel_for_dataset(&d, kind, 0.1, &grid, None, None).unwrap();
    let r = estimate_distribution(&d, kind, 0.1, &grid, &kt).unwrap();
    let se = r.distribution.std_errors.as_ref().unwrap();
    for i in 1..100 {
        let want = 2.0 / PI * grid[i].sin().powi(2);
        let got = r.distribution.values[i];
        assert!((got - want).abs() < 3.0 * se[i], "phi={}: {got} vs {want} (se {})", grid[i], se[i]);
    }
}

#[test]
fn estimates_approach_the_target_as_events_grow() {
    // median over 11 seeds of the sup distance for 1e3, 1e4, 1e5 events per
    // phase
    let spec = StateSpec::coherent(Complex64::new(1.0, 0.0));
    let rho = DensityMatrix::from(&spec.build().unwrap());
    let kind = PhaseKind::Cosine;
    let grid = kind.grid(101);
    let target = coarse_phase_distribution(&rho, kind, 0.4, &grid, None).unwrap();
    let phases = sgphase::homodyne::midpoint_phases(30);
    let ks = KernelSpec::for_kind(kind, 0.4, None, &grid, QuadratureGrid::symmetric(8.0, 1601).unwrap(), &phases)
        .unwrap();
    let kt = KernelTable::build(ks).unwrap();
    let mut medians = Vec::new();
    for events in [1_000usize, 10_000, 100_000] {
        let mut dist: Vec<f64> = (0..11u64)
            .map(|seed| {
                let d = generate_dataset(&spec, 30, events, 1.0, 1000 + seed).unwrap();
                estimate_distribution(&d, kind, 0.4, &grid, &kt).unwrap().distribution.sup_distance(&target)
            })
            .collect();
        dist.sort_by(f64::total_cmp);
        medians.push(dist[5]);
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}
