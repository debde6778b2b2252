//! Wiener and low-pass denoising of a bandlimited process in white noise.

use graphspec::denoise::{broadcast_noise, lowpass_denoise, reconstruction_mse, wiener_denoise};
use graphspec::graphgen::{generate_graph, GraphFamily, GraphSpec};
use graphspec::process::{generate_from_psd, white_noise, NoiseKind};
use graphspec::spectral::{SpectralBasis, C64};
use nalgebra::DVector;

fn main() -> graphspec::error::Result<()> {
    let shift = generate_graph(&GraphSpec::new(50, GraphFamily::ErdosRenyi { p: 0.15 }), 2)?;
    let basis = SpectralBasis::from_shift(&shift)?;
    // Half the spectrum is silent, the rest decays.
    let p = DVector::from_fn(50, |k, _| if k < 25 { 0.0 } else { 1.0 + (k - 25) as f64 / 10.0 });
    let sigma2 = 0.5;
    let noise_power = broadcast_noise(50, sigma2);

    let trials = 200;
    let (mut raw, mut wiener, mut lowpass) = (0.0, 0.0, 0.0);
    for t in 0..trials {
        let x = generate_from_psd(&basis, &p, 1, NoiseKind::Gaussian, t)?.column(0);
        let w = white_noise(50, 1, NoiseKind::Gaussian, 10_000 + t).map(|v| C64::new(v * sigma2.sqrt(), 0.0));
        let y = &x + w.column(0);
        raw += reconstruction_mse(&y, &x);
        wiener += reconstruction_mse(&wiener_denoise(&basis, &p, &noise_power, &y)?, &x);
        lowpass += reconstruction_mse(&lowpass_denoise(&basis, &p, &y, None)?, &x);
    }
    let n = trials as f64;
    println!("noisy {:.4}  low-pass {:.4}  wiener {:.4}", raw / n, lowpass / n, wiener / n);
    Ok(())
}
