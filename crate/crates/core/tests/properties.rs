use graphspec::graphgen::{generate_graph, GraphFamily, GraphSpec};
use graphspec::nonparametric::{correlogram, fir_bandpass_solutions, periodogram};
use graphspec::parametric::{ma_psd, nnls, MaModel};
use graphspec::process::{sample_covariance, stationarity_metric, true_covariance, CovarianceMatrix, SignalEnsemble};
use graphspec::spectral::{apply_filter_vertex, filter_freq_response, CVector, GraphFilter, GraphShift, SpectralBasis, C64};
use graphspec::denoise::wiener_gains;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn er_graph() -> impl Strategy<Value = (GraphShift, SpectralBasis)> {
    (4usize..16, 0.2f64..0.8, any::<u64>()).prop_map(|(n, p, seed)| {
        let shift = generate_graph(&GraphSpec::new(n, GraphFamily::ErdosRenyi { p }), seed).unwrap();
        let basis = SpectralBasis::from_shift(&shift).unwrap();
        (shift, basis)
    })
}

fn cycle_graph() -> impl Strategy<Value = (GraphShift, SpectralBasis)> {
    (3usize..12).prop_map(|n| {
        let shift = generate_graph(&GraphSpec::new(n, GraphFamily::DirectedCycle), 0).unwrap();
        let basis = SpectralBasis::from_shift(&shift).unwrap();
        (shift, basis)
    })
}

fn signal(n: usize, seed: u64) -> CVector {
    let mut s = seed;
    DVector::from_fn(n, |_, _| {
        s = graphspec::rng::splitmix64(s);
        C64::new((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5, 0.0)
    })
}

fn taps() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gft_roundtrip((_, basis) in er_graph(), seed in any::<u64>()) {
        let x = signal(basis.n(), seed);
        let back = basis.igft(&basis.gft(&x).unwrap()).unwrap();
        prop_assert!((back - &x).norm() <= 1e-10 * (1.0 + x.norm()));
    }

    #[test]
    fn gft_roundtrip_on_directed_cycle((_, basis) in cycle_graph(), seed in any::<u64>()) {
        let x = signal(basis.n(), seed);
        let back = basis.igft(&basis.gft(&x).unwrap()).unwrap();
        prop_assert!((back - &x).norm() <= 1e-10 * (1.0 + x.norm()));
    }

    #[test]
    fn vertex_and_frequency_filtering_agree((shift, basis) in er_graph(), h in taps(), seed in any::<u64>()) {
        let rho = basis.max_abs_eig().max(1.0);
        let scaled: Vec<f64> = h.iter().enumerate().map(|(l, c)| c / rho.powi(l as i32)).collect();
        let f = GraphFilter::from_real(&scaled).unwrap();
        let x = signal(basis.n(), seed);
        let vertex = apply_filter_vertex(&shift, &f, &x).unwrap();
        let freq = basis.igft(&basis.gft(&x).unwrap().component_mul(&filter_freq_response(&basis, &f).unwrap())).unwrap();
        prop_assert!((vertex - freq).norm() <= 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn filters_commute_with_the_shift((shift, _) in cycle_graph(), h in taps(), seed in any::<u64>()) {
        let f = GraphFilter::from_real(&h).unwrap();
        let x = signal(shift.n(), seed);
        let a = apply_filter_vertex(&shift, &f, &shift.apply(&x).unwrap()).unwrap();
        let b = shift.apply(&apply_filter_vertex(&shift, &f, &x).unwrap()).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + x.norm()));
    }

    #[test]
    fn periodogram_equals_correlogram((_, basis) in er_graph(), r in 1usize..6, seed in any::<u64>()) {
        let n = basis.n();
        let cols: Vec<CVector> = (0..r as u64).map(|i| signal(n, seed ^ (i + 1))).collect();
        let ens = SignalEnsemble::from_complex(DMatrix::from_columns(&cols)).unwrap();
        let a = periodogram(&basis, &ens).unwrap().p;
        let b = correlogram(&basis, &sample_covariance(&ens)).unwrap().p;
        prop_assert!((&a - &b).amax() <= 1e-12 * (1.0 + a.amax()));
    }

    #[test]
    fn ma_psd_ignores_global_sign((_, basis) in er_graph(), beta in taps()) {
        let neg: Vec<f64> = beta.iter().map(|b| -b).collect();
        let p = ma_psd(&basis, &MaModel { beta }).unwrap().p;
        let q = ma_psd(&basis, &MaModel { beta: neg }).unwrap().p;
        prop_assert!((&p - &q).amax() <= 1e-12 * (1.0 + p.amax()));
    }

    #[test]
    fn stationarity_metric_is_scale_invariant((_, basis) in er_graph(), h in taps(), scale in 1e-3f64..1e3) {
        let cov = true_covariance(&basis, &GraphFilter::from_real(&h).unwrap()).unwrap();
        let scaled = CovarianceMatrix::new(cov.matrix() * C64::new(scale, 0.0)).unwrap();
        let a = stationarity_metric(&basis, &cov).unwrap();
        let b = stationarity_metric(&basis, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
        prop_assert!(a > 1.0 - 1e-9);
    }

    #[test]
    fn wiener_gains_lie_in_unit_interval(p in prop::collection::vec(0.0f64..10.0, 1..20), w in 0.0f64..5.0) {
        let p = DVector::from_vec(p);
        let g = wiener_gains(&p, &DVector::from_element(p.len(), w)).unwrap();
        prop_assert!(g.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn fir_response_is_one_at_its_own_frequency((_, basis) in er_graph(), l in 1usize..4) {
        if let Ok(sols) = fir_bandpass_solutions(&basis, l) {
            for (k, (q, _)) in sols.iter().enumerate() {
                prop_assert!((q[k] - C64::new(1.0, 0.0)).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn nnls_satisfies_kkt(rows in 3usize..8, cols in 1usize..4, seed in any::<u64>()) {
        let v = signal(rows * cols + rows, seed);
        let a = DMatrix::from_fn(rows, cols, |i, j| v[i * cols + j].re);
        let b = DVector::from_fn(rows, |i, _| v[rows * cols + i].re);
        let sol = nnls(&a, &b).unwrap();
        prop_assert!(sol.x.iter().all(|&x| x >= 0.0));
        let grad = a.transpose() * (&a * &sol.x - &b);
        let tol = 1e-9 * (1.0 + (a.transpose() * &b).norm());
        for (x, g) in sol.x.iter().zip(grad.iter()) {
            prop_assert!(*g >= -tol);
            if *x > 0.0 {
                prop_assert!(g.abs() <= tol);
            }
        }
    }
}
