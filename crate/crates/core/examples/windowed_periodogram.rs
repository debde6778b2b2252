//! Windowed average periodogram from a single realization, comparing
//! community windows against random ones.

use graphspec::experiment::nmse;
use graphspec::graphgen::{generate_graph, GraphSpec};
use graphspec::nonparametric::{
    design_windows, predict_window_moments, windowed_avg_periodogram, WindowBank, WindowStrategy,
};
use graphspec::process::{filter_psd, generate_stationary, NoiseKind};
use graphspec::spectral::{GraphFilter, SpectralBasis};

fn main() -> graphspec::error::Result<()> {
    let spec = GraphSpec::sbm(5, 10, 0.9, 0.05).laplacian();
    let shift = generate_graph(&spec, 2)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    let h = GraphFilter::from_real(&[1.0, -0.8 / basis.max_abs_eig()])?;
    let p = filter_psd(&basis, &h)?;

    let banks = [
        ("communities", WindowBank::from_blocks(50, spec.communities().unwrap())?),
        ("local", design_windows(&shift, 5, WindowStrategy::Local, 0)?),
        ("random", design_windows(&shift, 5, WindowStrategy::Random, 0)?),
    ];
    for (name, bank) in &banks {
        let pred = predict_window_moments(&basis, bank, &p)?;
        let trials = 200;
        let mut total = 0.0;
        for t in 0..trials {
            let x = generate_stationary(&shift, &h, 1, NoiseKind::Gaussian, t)?.column(0);
            total += nmse(&windowed_avg_periodogram(&basis, bank, &x)?.p, &p);
        }
        println!(
            "{name:>11}: empirical NMSE {:.3}  predicted {:.3}",
            total / trials as f64,
            pred.mse / p.norm_squared()
        );
    }
    Ok(())
}
