//! Frequency-domain denoising of a stationary graph signal in white noise.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::spectral::{CVector, SpectralBasis};

/// Relative threshold below which a frequency counts as inactive.
pub const ACTIVE_REL_TOL: f64 = 1e-10;

fn check_nonneg(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidArgument(format!("{what} must be finite and nonnegative")));
    }
    Ok(())
}

fn apply_gains(basis: &SpectralBasis, gains: &DVector<f64>, y: &CVector) -> Result<CVector> {
    let mut yt = basis.gft(y)?;
    for (z, g) in yt.iter_mut().zip(gains.iter()) {
        *z *= *g;
    }
    basis.igft(&yt)
}

/// Wiener gains `p_k / (p_k + ω_k²)`, zero where both vanish.
pub fn wiener_gains(p: &DVector<f64>, noise_power: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(p.len(), noise_power.len())?;
    check_nonneg(p, "PSD")?;
    check_nonneg(noise_power, "noise power")?;
    Ok(p.zip_map(noise_power, |pk, wk| if pk + wk > 0.0 { pk / (pk + wk) } else { 0.0 }))
}

/// `V diag(p/(p + ω²)) V^H y`.
pub fn wiener_denoise(basis: &SpectralBasis, p: &DVector<f64>, noise_power: &DVector<f64>, y: &CVector) -> Result<CVector> {
    check_dim(basis.n(), p.len())?;
    check_dim(basis.n(), y.len())?;
    apply_gains(basis, &wiener_gains(p, noise_power)?, y)
}

/// Keeps the frequencies with `p_k > τ` and zeroes the rest; `τ` defaults to
/// `1e−10 · max p`.
pub fn lowpass_denoise(basis: &SpectralBasis, p: &DVector<f64>, y: &CVector, threshold: Option<f64>) -> Result<CVector> {
    check_dim(basis.n(), p.len())?;
    check_dim(basis.n(), y.len())?;
    check_nonneg(p, "PSD")?;
    let tau = threshold.unwrap_or(ACTIVE_REL_TOL * p.max());
    let gains = p.map(|pk| if pk > tau { 1.0 } else { 0.0 });
    apply_gains(basis, &gains, y)
}

/// Expands a scalar noise power to every frequency.
pub fn broadcast_noise(n: usize, power: f64) -> DVector<f64> {
    DVector::from_element(n, power)
}

/// Mean squared reconstruction error `‖x̂ − x‖² / N`.
pub fn reconstruction_mse(estimate: &CVector, truth: &CVector) -> f64 {
    (estimate - truth).norm_squared() / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::C64;
    use crate::graphgen::{generate_graph, GraphFamily, GraphSpec};

    fn real_signal(v: &DVector<f64>) -> CVector {
        v.map(|x| C64::new(x, 0.0))
    }

    fn setup() -> (SpectralBasis, CVector) {
        let s = generate_graph(&GraphSpec::new(6, GraphFamily::Path), 0).unwrap();
        let b = SpectralBasis::from_shift(&s).unwrap();
        let y = real_signal(&DVector::from_vec(vec![1.0, -0.5, 2.0, 0.0, 0.3, -1.2]));
        (b, y)
    }

    #[test]
    fn zero_noise_is_passthrough() {
        let (b, y) = setup();
        let p = DVector::from_vec(vec![1.0, 2.0, 0.5, 0.1, 3.0, 1.5]);
        let out = wiener_denoise(&b, &p, &broadcast_noise(6, 0.0), &y).unwrap();
        assert!((out - &y).norm() < 1e-10);
    }

    #[test]
    fn inactive_frequency_is_removed() {
        let (b, y) = setup();
        let mut p = DVector::from_element(6, 1.0);
        p[2] = 0.0;
        let out = wiener_denoise(&b, &p, &broadcast_noise(6, 0.0), &y).unwrap();
        let lp = lowpass_denoise(&b, &p, &y, None).unwrap();
        assert!(b.gft(&out).unwrap()[2].norm() < 1e-12);
        assert!((out - lp).norm() < 1e-10);
    }

    #[test]
    fn equal_signal_and_noise_halves() {
        let (b, y) = setup();
        let out = wiener_denoise(&b, &DVector::from_element(6, 1.0), &broadcast_noise(6, 1.0), &y).unwrap();
        assert!((out - &y * C64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn lowpass_extremes_and_zero_gain_rule() {
        let (b, y) = setup();
        let all = lowpass_denoise(&b, &DVector::from_element(6, 2.0), &y, None).unwrap();
        assert!((all - &y).norm() < 1e-10);
        let none = lowpass_denoise(&b, &DVector::zeros(6), &y, None).unwrap();
        assert!(none.norm() < 1e-14);
        let g = wiener_gains(&DVector::zeros(2), &DVector::zeros(2)).unwrap();
        assert_eq!(g, DVector::zeros(2));
        assert!(wiener_denoise(&b, &DVector::zeros(5), &broadcast_noise(5, 1.0), &y).is_err());
    }
}
