//! ARMA fits: the two equation-error variants and the direct ratio fit.

use graphspec::experiment::{nmse, random_arma};
use graphspec::graphgen::{generate_graph, GraphFamily, GraphSpec};
use graphspec::nonparametric::periodogram;
use graphspec::parametric::{arma_fit_ls, arma_fit_ratio, arma_psd, ArmaVariant, DescentConfig};
use graphspec::process::{generate_from_psd, NoiseKind};
use graphspec::spectral::SpectralBasis;

fn main() -> graphspec::error::Result<()> {
    let shift = generate_graph(&GraphSpec::new(100, GraphFamily::ErdosRenyi { p: 0.2 }).laplacian(), 1)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    let truth = random_arma(&basis, 2, 3)?;
    let p = arma_psd(&basis, &truth)?.p;
    println!("true model a={:.3?} b={:.3?}", truth.a, truth.b);

    for r in [1, 2, 10] {
        let ens = generate_from_psd(&basis, &p, r, NoiseKind::Gaussian, 4)?;
        let p_hat = periodogram(&basis, &ens)?.p;
        let relaxed = arma_fit_ls(&basis, &p_hat, 2, 2, ArmaVariant::Relaxed)?;
        let nonneg = arma_fit_ls(&basis, &p_hat, 2, 2, ArmaVariant::Nonneg)?;
        let ratio = arma_fit_ratio(&basis, &p_hat, 2, 2, &DescentConfig::default())?;
        println!(
            "R={r:>2}: periodogram {:.3e}  relaxed {:.3e} ({} pole violations)  nonneg {:.3e}  ratio {:.3e}",
            nmse(&p_hat, &p),
            nmse(&relaxed.psd.p, &p),
            relaxed.pole_violations.len(),
            nmse(&nonneg.psd.p, &p),
            nmse(&arma_psd(&basis, &ratio.model)?.p, &p),
        );
    }
    Ok(())
}
