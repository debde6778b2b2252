//! Ideal and FIR bandpass filter banks on one realization.

use graphspec::experiment::nmse;
use graphspec::graphgen::{generate_graph, GraphFamily, GraphSpec};
use graphspec::nonparametric::{
    design_fir_bandpass, design_ideal_bandpass, filterbank_estimate, predict_filterbank_moments_normal, FilterBank,
};
use graphspec::process::{filter_psd, generate_stationary, NoiseKind};
use graphspec::spectral::{GraphFilter, SpectralBasis};

fn main() -> graphspec::error::Result<()> {
    let shift = generate_graph(&GraphSpec::new(60, GraphFamily::ErdosRenyi { p: 0.1 }), 4)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    let rho = basis.max_abs_eig();
    let h = GraphFilter::from_real(&[1.0, 0.6 / rho, -0.3 / (rho * rho)])?;
    let p = filter_psd(&basis, &h)?;

    let banks: Vec<(String, FilterBank)> = vec![
        ("ideal B=3".into(), design_ideal_bandpass(&basis, 3)?),
        ("ideal B=7".into(), design_ideal_bandpass(&basis, 7)?),
        ("fir L=5".into(), design_fir_bandpass(&basis, 5)?),
    ];
    for (name, bank) in &banks {
        let pred = predict_filterbank_moments_normal(&basis, bank, &p)?;
        let trials = 200;
        let mut total = 0.0;
        for t in 0..trials {
            let x = generate_stationary(&shift, &h, 1, NoiseKind::Gaussian, t)?.column(0);
            total += nmse(&filterbank_estimate(&basis, bank, &x)?.p, &p);
        }
        println!("{name:>9}: empirical {:.3}  predicted {:.3}", total / trials as f64, pred.mse / p.norm_squared());
    }
    Ok(())
}
