//! Checks that a filtered-white-noise covariance is diagonalized by the GFT,
//! commutes with the shift and is supported on a small neighbourhood.

use graphspec::graphgen::{generate_graph, GraphFamily, GraphSpec};
use graphspec::process::{
    default_exponent_triples, generate_stationary, locality_support_check, sample_covariance,
    shift_invariance_residual, stationarity_metric, true_covariance, NoiseKind,
};
use graphspec::spectral::{GraphFilter, SpectralBasis};

fn main() -> graphspec::error::Result<()> {
    let shift = generate_graph(&GraphSpec::new(40, GraphFamily::ErdosRenyi { p: 0.1 }), 3)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    let h = GraphFilter::from_real(&[1.0, 0.3])?;

    let exact = true_covariance(&basis, &h)?;
    println!("theta(true covariance)   = {:.3e}", stationarity_metric(&basis, &exact)?);
    for (a, b, c) in default_exponent_triples(3) {
        let r = shift_invariance_residual(&shift, &exact, a, b, c)?;
        println!("  residual S^{a} C S^{b} vs S^{c}: {r:.2e}");
    }
    let loc = locality_support_check(&shift, &exact, h.len())?;
    println!("support within {} hops: {}", loc.radius, loc.holds);

    // The sample covariance is only approximately diagonal.
    for r in [10, 100, 1000] {
        let ens = generate_stationary(&shift, &h, r, NoiseKind::Gaussian, 1)?;
        println!("theta(sample, R={r:>4}) = {:.3e}", stationarity_metric(&basis, &sample_covariance(&ens))?);
    }
    Ok(())
}
