//! Fits an MA model three ways and compares with the raw periodogram.

use graphspec::experiment::{nmse, random_filter};
use graphspec::graphgen::{generate_graph, GraphFamily, GraphSpec};
use graphspec::nonparametric::periodogram;
use graphspec::parametric::{ma_fit_freq, ma_fit_nonneg, ma_fit_symmetric, ma_psd, DescentConfig};
use graphspec::process::{filter_psd, generate_stationary, sample_covariance, NoiseKind};
use graphspec::spectral::SpectralBasis;

fn main() -> graphspec::error::Result<()> {
    let shift = generate_graph(&GraphSpec::new(100, GraphFamily::ErdosRenyi { p: 0.2 }).laplacian(), 1)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    let h = random_filter(&basis, 3, 5)?;
    let p = filter_psd(&basis, &h)?;
    let ens = generate_stationary(&shift, &h, 100, NoiseKind::Gaussian, 6)?;
    let p_hat = periodogram(&basis, &ens)?.p;

    let freq = ma_fit_freq(&basis, &p_hat, 3, &DescentConfig::default())?;
    let sym = ma_fit_symmetric(&basis, &sample_covariance(&ens), 3)?;
    let nonneg = ma_fit_nonneg(&basis, &p_hat, 3)?;

    println!("true taps       {:.4?}", h.real_coeffs().unwrap());
    println!("frequency fit   {:.4?}  (sign is not identifiable)", freq.model.beta);
    println!("periodogram NMSE  {:.4e}", nmse(&p_hat, &p));
    println!("frequency fit     {:.4e}", nmse(&ma_psd(&basis, &freq.model)?.p, &p));
    println!("symmetric fit     {:.4e}", nmse(&sym.psd.p, &p));
    println!("nonnegative fit   {:.4e}", nmse(&ma_psd(&basis, &nonneg.model)?.p, &p));
    Ok(())
}
