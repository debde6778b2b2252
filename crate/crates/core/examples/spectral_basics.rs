//! GFT roundtrip and the two equivalent ways of applying a graph filter.

use graphspec::graphgen::{generate_graph, GraphFamily, GraphSpec};
use graphspec::spectral::{apply_filter_vertex, filter_freq_response, GraphFilter, SpectralBasis, C64};
use nalgebra::DVector;

fn main() -> graphspec::error::Result<()> {
    let shift = generate_graph(&GraphSpec::new(8, GraphFamily::Path), 0)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    println!("eigenvalues: {:.3?}", basis.lambda_real().unwrap());

    let x = DVector::from_fn(8, |i, _| C64::new((i as f64).sin(), 0.0));
    let xt = basis.gft(&x)?;
    println!("roundtrip error: {:.2e}", (basis.igft(&xt)? - &x).norm());

    // Vertex domain: Σ h_l S^l x. Frequency domain: V diag(h(λ)) V^H x.
    let h = GraphFilter::from_real(&[1.0, -0.4, 0.05])?;
    let y_vertex = apply_filter_vertex(&shift, &h, &x)?;
    let response = filter_freq_response(&basis, &h)?;
    let y_freq = basis.igft(&xt.component_mul(&response))?;
    println!("filter domains agree to {:.2e}", (y_vertex - y_freq).norm());
    Ok(())
}
