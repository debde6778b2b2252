//! Periodogram NMSE against the `2/R` law for a random ER graph.

use graphspec::experiment::nmse;
use graphspec::graphgen::{generate_graph, GraphFamily, GraphSpec};
use graphspec::nonparametric::{correlogram, periodogram, predict_periodogram_moments_normal};
use graphspec::process::{filter_psd, generate_stationary, sample_covariance, NoiseKind};
use graphspec::spectral::{GraphFilter, SpectralBasis};

fn main() -> graphspec::error::Result<()> {
    let shift = generate_graph(&GraphSpec::new(100, GraphFamily::ErdosRenyi { p: 0.05 }), 1)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    let rho = basis.max_abs_eig();
    let h = GraphFilter::from_real(&[1.0, 0.5 / rho, 0.25 / (rho * rho)])?;
    let p = filter_psd(&basis, &h)?;

    for r in [1, 10, 100] {
        let trials = 50;
        let mut total = 0.0;
        for t in 0..trials {
            let ens = generate_stationary(&shift, &h, r, NoiseKind::Gaussian, t)?;
            total += nmse(&periodogram(&basis, &ens)?.p, &p);
        }
        let predicted = predict_periodogram_moments_normal(&basis, &p, r)?.mse / p.norm_squared();
        println!("R={r:>3}: empirical {:.4}  predicted {:.4}", total / trials as f64, predicted);
    }

    let ens = generate_stationary(&shift, &h, 5, NoiseKind::Gaussian, 99)?;
    let gap = (periodogram(&basis, &ens)?.p - correlogram(&basis, &sample_covariance(&ens))?.p).amax();
    println!("periodogram vs correlogram: {gap:.2e}");
    Ok(())
}
