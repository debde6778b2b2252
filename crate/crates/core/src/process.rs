//! Weakly stationary graph processes: generation, covariance and PSD
//! conversions, and diagnostics for the three equivalent characterizations
//! (filtered white noise, shift-invariant correlations, covariance
//! diagonalized by the GFT).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::graphgen::{hop_distances, HopDistanceTable};
use crate::rng;
use crate::spectral::{
    filter_freq_response, power_columns, to_complex, CMatrix, CVector, GraphFilter, GraphShift, SpectralBasis, C64,
};

/// Relative tolerance below which negative PSD entries are clipped to zero.
pub const PSD_CLIP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Uniform on `[−√3, √3]` (zero mean, unit variance).
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    Real(DMatrix<f64>),
    Complex(CMatrix),
}

/// `N × R` matrix of realizations, column `r` being `x_r`.
#[derive(Clone, Debug)]
pub struct SignalEnsemble {
    data: Samples,
    pub noise_kind: Option<NoiseKind>,
    pub generator: Option<GraphFilter>,
    pub seed: Option<u64>,
}

impl SignalEnsemble {
    pub fn from_real(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one realization".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("ensemble entries must be finite".into()));
        }
        Ok(Self { data: Samples::Real(data), noise_kind: None, generator: None, seed: None })
    }

    pub fn from_complex(data: CMatrix) -> Result<Self> {
        if data.iter().all(|z| z.im == 0.0) {
            return Self::from_real(data.map(|z| z.re));
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one realization".into()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("ensemble entries must be finite".into()));
        }
        Ok(Self { data: Samples::Complex(data), noise_kind: None, generator: None, seed: None })
    }

    /// Single realization.
    pub fn from_signal(x: &CVector) -> Result<Self> {
        Self::from_complex(CMatrix::from_column_slice(x.len(), 1, x.as_slice()))
    }

    pub fn n(&self) -> usize {
        match &self.data {
            Samples::Real(m) => m.nrows(),
            Samples::Complex(m) => m.nrows(),
        }
    }

    pub fn r(&self) -> usize {
        match &self.data {
            Samples::Real(m) => m.ncols(),
            Samples::Complex(m) => m.ncols(),
        }
    }

    pub fn samples(&self) -> &Samples {
        &self.data
    }

    pub fn real(&self) -> Option<&DMatrix<f64>> {
        match &self.data {
            Samples::Real(m) => Some(m),
            Samples::Complex(_) => None,
        }
    }

    pub fn to_complex(&self) -> CMatrix {
        match &self.data {
            Samples::Real(m) => m.map(|v| C64::new(v, 0.0)),
            Samples::Complex(m) => m.clone(),
        }
    }

    pub fn column(&self, r: usize) -> CVector {
        match &self.data {
            Samples::Real(m) => to_complex(&m.column(r).into_owned()),
            Samples::Complex(m) => m.column(r).into_owned(),
        }
    }

    /// Removes the projection of every realization onto eigenvector `k`
    /// (a mean of the form `α v_k`).
    pub fn remove_mean_component(&self, basis: &SpectralBasis, k: usize) -> Result<Self> {
        check_dim(basis.n(), self.n())?;
        if k >= basis.n() {
            return Err(Error::InvalidArgument(format!("no eigenvector {k}")));
        }
        let mut out = match (&self.data, basis.v_real()) {
            (Samples::Real(x), Some(v)) => {
                let vk = v.column(k);
                let coeffs = x.tr_mul(&vk);
                Self::from_real(x - vk * coeffs.transpose())?
            }
            _ => {
                let x = self.to_complex();
                let vk = basis.v().column(k);
                let coeffs = x.ad_mul(&vk).map(|z| z.conj());
                Self::from_complex(&x - vk * coeffs.transpose())?
            }
        };
        out.noise_kind = self.noise_kind;
        out.generator = self.generator.clone();
        out.seed = self.seed;
        Ok(out)
    }
}

/// Zero-mean unit-variance white noise; column `r` comes from stream `r`.
pub fn white_noise(n: usize, r: usize, kind: NoiseKind, seed: u64) -> DMatrix<f64> {
    let half_width = 3f64.sqrt();
    let columns: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|col| {
            let mut g = rng::stream_rng(seed, col as u64);
            (0..n)
                .map(|_| match kind {
                    NoiseKind::Gaussian => g.sample::<f64, _>(StandardNormal),
                    NoiseKind::Uniform => g.random_range(-half_width..half_width),
                })
                .collect()
        })
        .collect();
    DMatrix::from_iterator(n, r, columns.into_iter().flatten())
}

/// `R` realizations `x_r = H w_r` of the process generated by `filter`.
pub fn generate_stationary(
    shift: &GraphShift,
    filter: &GraphFilter,
    r: usize,
    noise_kind: NoiseKind,
    seed: u64,
) -> Result<SignalEnsemble> {
    if r == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    let n = shift.n();
    filter.check_fits(n)?;
    let w = white_noise(n, r, noise_kind, seed);
    let mut ens = match (shift.real_entries(), filter.real_coeffs()) {
        (Some(s), Some(h)) => {
            let mut shifted = w.clone();
            let mut x = &w * h[0];
            for &c in &h[1..] {
                shifted = s * &shifted;
                x += &shifted * c;
            }
            SignalEnsemble::from_real(x)?
        }
        _ => {
            let s = shift.entries();
            let wc = w.map(|v| C64::new(v, 0.0));
            let mut shifted = wc.clone();
            let mut x = &wc * filter.coeffs()[0];
            for &c in &filter.coeffs()[1..] {
                shifted = s * &shifted;
                x += &shifted * c;
            }
            SignalEnsemble::from_complex(x)?
        }
    };
    ens.noise_kind = Some(noise_kind);
    ens.generator = Some(filter.clone());
    ens.seed = Some(seed);
    Ok(ens)
}

/// Realizations `V diag(√p) V^H w_r` of the process with PSD `p`.
pub fn generate_from_psd(
    basis: &SpectralBasis,
    p: &DVector<f64>,
    r: usize,
    noise_kind: NoiseKind,
    seed: u64,
) -> Result<SignalEnsemble> {
    check_dim(basis.n(), p.len())?;
    if r == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    if p.iter().any(|&v| v.is_nan() || v < 0.0) {
        return Err(Error::InvalidArgument("PSD must be nonnegative".into()));
    }
    let w = white_noise(basis.n(), r, noise_kind, seed);
    let sqrt_p = p.map(f64::sqrt);
    let mut ens = match basis.v_real() {
        Some(v) => {
            let mut wt = v.tr_mul(&w);
            for (k, mut row) in wt.row_iter_mut().enumerate() {
                row *= sqrt_p[k];
            }
            SignalEnsemble::from_real(v * wt)?
        }
        None => {
            let v = basis.v();
            let mut wt = v.ad_mul(&w.map(|x| C64::new(x, 0.0)));
            for (k, mut row) in wt.row_iter_mut().enumerate() {
                row *= C64::new(sqrt_p[k], 0.0);
            }
            SignalEnsemble::from_complex(v * wt)?
        }
    };
    ens.noise_kind = Some(noise_kind);
    ens.seed = Some(seed);
    Ok(ens)
}

/// Polynomial coefficients of `Π_l (I − γ_l S)`.
///
/// When the expansion has more than `N` taps and the eigenvalues are
/// distinct, it is reduced to an equivalent filter with `N` taps by matching
/// the frequency response.
pub fn diffusion_filter(basis: &SpectralBasis, rates: &[f64]) -> Result<GraphFilter> {
    let mut coeffs = vec![1.0];
    for &g in rates {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (l, &c) in coeffs.iter().enumerate() {
            next[l] += c;
            next[l + 1] -= g * c;
        }
        coeffs = next;
    }
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    let n = basis.n();
    if coeffs.len() <= n {
        return GraphFilter::from_real(&coeffs);
    }
    if !basis.distinct_eigs() {
        return Err(Error::DegreeOverflow { degree: coeffs.len() - 1, max: n - 1 });
    }
    let full = GraphFilter::from_real(&coeffs)?;
    let response = basis.lambda().map(|lam| full.eval(lam));
    solve_vandermonde(basis, &response)
}

fn solve_vandermonde(basis: &SpectralBasis, response: &CVector) -> Result<GraphFilter> {
    if !basis.distinct_eigs() {
        return Err(Error::EigsNotDistinct);
    }
    let n = basis.n();
    let scale = basis.max_abs_eig().max(f64::MIN_POSITIVE);
    let psi = power_columns(basis.lambda().as_slice(), n, scale);
    let h = psi
        .lu()
        .solve(response)
        .ok_or_else(|| Error::NumericalFailure("singular Vandermonde system".into()))?;
    let coeffs: Vec<C64> = h.iter().enumerate().map(|(l, &c)| c / scale.powi(l as i32)).collect();
    if coeffs.iter().all(|z| z.im.abs() <= 1e-10 * z.norm().max(1e-300)) && basis.is_hermitian() {
        GraphFilter::from_real(&coeffs.iter().map(|z| z.re).collect::<Vec<_>>())
    } else {
        GraphFilter::new(coeffs)
    }
}

/// A filter whose white-noise response has PSD `p` (requires distinct
/// eigenvalues).
pub fn filter_for_psd(basis: &SpectralBasis, p: &DVector<f64>) -> Result<GraphFilter> {
    check_dim(basis.n(), p.len())?;
    solve_vandermonde(basis, &p.map(|v| C64::new(v.max(0.0).sqrt(), 0.0)))
}

/// Hermitian positive-semidefinite covariance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    c: CMatrix,
}

impl CovarianceMatrix {
    /// Validates Hermitian symmetry and positive semidefiniteness.
    pub fn new(c: CMatrix) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::DimensionMismatch { expected: c.nrows(), found: c.ncols() });
        }
        let norm = c.norm();
        if (&c - c.adjoint()).norm() > 1e-10 * norm {
            return Err(Error::InvalidArgument("covariance is not Hermitian".into()));
        }
        let herm = (&c + c.adjoint()).map(|z| z * 0.5);
        let eigs = herm.symmetric_eigenvalues();
        let spectral = eigs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if eigs.iter().any(|&v| v < -1e-10 * spectral) {
            return Err(Error::InvalidArgument("covariance is not positive semidefinite".into()));
        }
        Ok(Self { c })
    }

    pub fn from_real(c: DMatrix<f64>) -> Result<Self> {
        Self::new(c.map(|v| C64::new(v, 0.0)))
    }

    pub(crate) fn new_unchecked(c: CMatrix) -> Self {
        Self { c }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    /// Spectral norm `‖C‖₂` (largest eigenvalue magnitude).
    pub fn spectral_norm(&self) -> f64 {
        let herm = (&self.c + self.c.adjoint()).map(|z| z * 0.5);
        herm.symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Estimator provenance attached to a PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PsdMethod {
    Truth,
    Covariance,
    Periodogram { realizations: usize },
    Correlogram,
    WindowedAverage { windows: usize, strategy: String },
    FilterBank { design: String },
    Model { model: String, variant: String },
    External,
}

/// Nonnegative PSD vector with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    #[serde(with = "crate::serde_vec")]
    pub p: DVector<f64>,
    pub method: PsdMethod,
}

impl PsdEstimate {
    /// Clips entries in `[−PSD_CLIP_TOL·scale, 0)` to zero and rejects more
    /// negative ones.
    pub fn from_raw(values: DVector<f64>, scale: f64, method: PsdMethod) -> Result<Self> {
        let floor = -PSD_CLIP_TOL * scale;
        let mut p = values;
        for (index, v) in p.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::NumericalFailure(format!("PSD entry {index} is not finite")));
            }
            if *v < 0.0 {
                if *v < floor {
                    return Err(Error::NegativePsd { index, value: *v });
                }
                *v = 0.0;
            }
        }
        Ok(Self { p, method })
    }

    /// Wraps a vector known to be nonnegative up to rounding.
    pub fn new(p: DVector<f64>, method: PsdMethod) -> Result<Self> {
        let scale = p.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Self::from_raw(p, scale, method)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// `Ĉ = (1/R) Σ_r x_r x_r^H`, with no mean removal.
pub fn sample_covariance(ens: &SignalEnsemble) -> CovarianceMatrix {
    let r = ens.r() as f64;
    let c = match ens.samples() {
        Samples::Real(x) => (x * x.transpose() / r).map(|v| C64::new(v, 0.0)),
        Samples::Complex(x) => x * x.adjoint() / C64::new(r, 0.0),
    };
    CovarianceMatrix::new_unchecked(c)
}

/// `C = V diag(|h̃|²) V^H`.
pub fn true_covariance(basis: &SpectralBasis, filter: &GraphFilter) -> Result<CovarianceMatrix> {
    let gain = filter_freq_response(basis, filter)?.map(|z| C64::new(z.norm_sqr(), 0.0));
    Ok(CovarianceMatrix::new_unchecked(hermitize(basis.synthesize(&gain)?)))
}

/// `C = V diag(p) V^H`.
pub fn covariance_from_psd(basis: &SpectralBasis, p: &DVector<f64>) -> Result<CovarianceMatrix> {
    if p.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("PSD must be nonnegative".into()));
    }
    Ok(CovarianceMatrix::new_unchecked(hermitize(basis.synthesize(&to_complex(p))?)))
}

fn hermitize(c: CMatrix) -> CMatrix {
    (&c + c.adjoint()).map(|z| z * 0.5)
}

/// `p = diag(V^H C V)`, real part, clipped relative to `‖C‖₂`.
pub fn psd_from_covariance(basis: &SpectralBasis, cov: &CovarianceMatrix) -> Result<PsdEstimate> {
    psd_from_frequency_diagonal(frequency_diagonal(basis, cov)?, cov, PsdMethod::Covariance)
}

pub(crate) fn psd_from_frequency_diagonal(diag: DVector<f64>, cov: &CovarianceMatrix, method: PsdMethod) -> Result<PsdEstimate> {
    // the spectral norm is only needed when something must be clipped
    let scale = if diag.iter().any(|&v| v < 0.0) { cov.spectral_norm() } else { 0.0 };
    PsdEstimate::from_raw(diag, scale, method)
}

pub(crate) fn frequency_diagonal(basis: &SpectralBasis, cov: &CovarianceMatrix) -> Result<DVector<f64>> {
    check_dim(basis.n(), cov.n())?;
    let v = basis.v();
    let cv = cov.matrix() * v;
    Ok(DVector::from_iterator(basis.n(), (0..basis.n()).map(|k| v.column(k).dotc(&cv.column(k)).re)))
}

/// `‖diag(V^H C V)‖₂ / ‖V^H C V‖_F`; equals one iff `V` diagonalizes `C`.
pub fn stationarity_metric(basis: &SpectralBasis, cov: &CovarianceMatrix) -> Result<f64> {
    let d = basis.to_frequency(cov.matrix())?;
    let total = d.norm();
    if total == 0.0 {
        return Ok(1.0);
    }
    let diag = d.diagonal().norm();
    Ok((diag / total).min(1.0))
}

/// `‖S^a C S^b − S^{a+c} C S^{b−c}‖_F / ‖C‖_F`, the vertex-domain
/// shift-invariance defect for one exponent triple.
pub fn shift_invariance_residual(shift: &GraphShift, cov: &CovarianceMatrix, a: usize, b: usize, c: usize) -> Result<f64> {
    shift_invariance_residual_bounded(shift, cov, a, b, c, 2 * shift.n())
}

pub fn shift_invariance_residual_bounded(
    shift: &GraphShift,
    cov: &CovarianceMatrix,
    a: usize,
    b: usize,
    c: usize,
    max_total: usize,
) -> Result<f64> {
    check_dim(shift.n(), cov.n())?;
    if c > b || a + b > max_total {
        return Err(Error::InvalidExponents { a, b, c });
    }
    let norm = cov.matrix().norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let s = shift.entries();
    let powers = matrix_powers(s, a + b);
    let lhs = &powers[a] * cov.matrix() * &powers[b];
    let rhs = &powers[a + c] * cov.matrix() * &powers[b - c];
    Ok((lhs - rhs).norm() / norm)
}

fn matrix_powers(s: &CMatrix, max: usize) -> Vec<CMatrix> {
    let mut out = vec![CMatrix::identity(s.nrows(), s.ncols())];
    for _ in 0..max {
        let next = s * out.last().unwrap();
        out.push(next);
    }
    out
}

/// A small set of exponent triples covering `a + b ≤ max_total`.
pub fn default_exponent_triples(max_total: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for total in 1..=max_total.min(4) {
        for b in 1..=total {
            let a = total - b;
            for c in 1..=b {
                out.push((a, b, c));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub holds: bool,
    /// `(i, j, |C_ij|)` for every pair farther than the allowed radius with a
    /// nonzero entry.
    pub violations: Vec<(usize, usize, f64)>,
    pub radius: usize,
}

/// Checks that `C_ij` vanishes whenever `j` lies outside the `2(L−1)`-hop
/// neighbourhood of `i`, for a filter with `taps = L` coefficients.
pub fn locality_support_check(shift: &GraphShift, cov: &CovarianceMatrix, taps: usize) -> Result<LocalityReport> {
    check_dim(shift.n(), cov.n())?;
    if taps == 0 {
        return Err(Error::InvalidArgument("filter needs at least one tap".into()));
    }
    let dist = hop_distances(shift);
    let radius = 2 * (taps - 1);
    let c = cov.matrix();
    let tol = 1e-10 * c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut violations = Vec::new();
    for i in 0..shift.n() {
        for j in 0..shift.n() {
            let far = dist.get(i, j).is_none_or(|d| d > radius);
            if far && c[(i, j)].norm() > tol {
                violations.push((i, j, c[(i, j)].norm()));
            }
        }
    }
    Ok(LocalityReport { holds: violations.is_empty(), violations, radius })
}

/// Support check against a precomputed hop table with an explicit radius.
pub fn support_within(dist: &HopDistanceTable, m: &CMatrix, radius: usize, tol: f64) -> bool {
    (0..m.nrows()).all(|i| {
        (0..m.ncols()).all(|j| dist.get(i, j).is_some_and(|d| d <= radius) || m[(i, j)].norm() <= tol)
    })
}

/// `p_out = |h̃|² ∘ p_in`.
pub fn filtered_psd(basis: &SpectralBasis, filter: &GraphFilter, p_in: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(basis.n(), p_in.len())?;
    let gain = filter_freq_response(basis, filter)?;
    Ok(DVector::from_iterator(p_in.len(), gain.iter().zip(p_in.iter()).map(|(h, p)| h.norm_sqr() * p)))
}

/// PSD of the process generated by `filter` from unit white noise.
pub fn filter_psd(basis: &SpectralBasis, filter: &GraphFilter) -> Result<DVector<f64>> {
    filtered_psd(basis, filter, &DVector::from_element(basis.n(), 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgen::{generate_graph, GraphFamily, GraphSpec};
    use crate::spectral::{filter_matrix, GraphShift, ShiftKind};
    use approx::assert_abs_diff_eq;

    fn path(n: usize) -> GraphShift {
        generate_graph(&GraphSpec::new(n, GraphFamily::Path), 0).unwrap()
    }

    fn cycle(n: usize) -> GraphShift {
        generate_graph(&GraphSpec::new(n, GraphFamily::DirectedCycle), 0).unwrap()
    }

    #[test]
    fn white_noise_process_has_identity_covariance() {
        let s = path(10);
        let f = GraphFilter::from_real(&[1.0]).unwrap();
        let ens = generate_stationary(&s, &f, 100_000, NoiseKind::Gaussian, 3).unwrap();
        let c = sample_covariance(&ens);
        let err = (c.matrix() - CMatrix::identity(10, 10)).norm() / (10f64).sqrt();
        assert!(err < 0.05, "relative error {err}");
        let b = SpectralBasis::from_shift(&s).unwrap();
        let p = psd_from_covariance(&b, &c).unwrap();
        assert!(p.p.iter().all(|&v| (v - 1.0).abs() < 0.05));
    }

    #[test]
    fn uniform_noise_has_unit_variance() {
        let w = white_noise(4, 50_000, NoiseKind::Uniform, 9);
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - 1.0).abs() < 0.02);
        assert!(w.iter().all(|v| v.abs() <= 3f64.sqrt()));
    }

    #[test]
    fn zero_filter_gives_zero_ensemble() {
        let ens = generate_stationary(&path(5), &GraphFilter::from_real(&[0.0, 0.0]).unwrap(), 4, NoiseKind::Gaussian, 0)
            .unwrap();
        assert!(ens.real().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_tap_filter_on_path_matches_closed_form() {
        let s = path(3);
        let f = GraphFilter::from_real(&[1.0, 1.0]).unwrap();
        let ens = generate_stationary(&s, &f, 100_000, NoiseKind::Gaussian, 1).unwrap();
        let sample = sample_covariance(&ens);
        let h = filter_matrix(&s, &f).unwrap();
        let truth = &h * h.adjoint();
        let err = (sample.matrix() - &truth).norm() / truth.norm();
        assert!(err < 0.02, "relative error {err}");
    }

    #[test]
    fn generation_is_reproducible() {
        let s = path(6);
        let f = GraphFilter::from_real(&[1.0, 0.3]).unwrap();
        let a = generate_stationary(&s, &f, 5, NoiseKind::Gaussian, 42).unwrap();
        let b = generate_stationary(&s, &f, 5, NoiseKind::Gaussian, 42).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn complex_shift_generation_matches_vertex_filter() {
        let s = cycle(5);
        let f = GraphFilter::new(vec![C64::new(1.0, 0.5), C64::new(0.0, -0.3)]).unwrap();
        let ens = generate_stationary(&s, &f, 3, NoiseKind::Gaussian, 2).unwrap();
        let w = white_noise(5, 3, NoiseKind::Gaussian, 2);
        let x1 = crate::spectral::apply_filter_vertex(&s, &f, &to_complex(&w.column(1).into_owned())).unwrap();
        assert_abs_diff_eq!((ens.column(1) - x1).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn diffusion_filter_expansions() {
        let b = SpectralBasis::from_shift(&path(5)).unwrap();
        assert_eq!(diffusion_filter(&b, &[0.0]).unwrap().real_coeffs().unwrap(), vec![1.0]);
        assert_eq!(diffusion_filter(&b, &[0.4]).unwrap().real_coeffs().unwrap(), vec![1.0, -0.4]);
        let (a, c) = (0.3, 0.5);
        let h = diffusion_filter(&b, &[a, c]).unwrap().real_coeffs().unwrap();
        let want = [1.0, -(a + c), a * c];
        for (x, y) in h.iter().zip(want) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn diffusion_filter_reduces_long_products() {
        let s = path(4);
        let b = SpectralBasis::from_shift(&s).unwrap();
        let rates = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let h = diffusion_filter(&b, &rates).unwrap();
        assert_eq!(h.len(), 4);
        let mut explicit = DMatrix::<f64>::identity(4, 4);
        for &g in &rates {
            explicit = (DMatrix::identity(4, 4) - s.real_entries().unwrap() * g) * explicit;
        }
        let reduced = filter_matrix(&s, &h).unwrap().map(|z| z.re);
        assert!((reduced - explicit).norm() < 1e-8);

        let repeated = GraphShift::from_real(DMatrix::identity(3, 3), ShiftKind::Custom).unwrap();
        let br = SpectralBasis::from_shift(&repeated).unwrap();
        assert!(matches!(diffusion_filter(&br, &[0.1; 5]), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn sample_covariance_examples() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let c = sample_covariance(&SignalEnsemble::from_real(x).unwrap());
        let mut e = CMatrix::zeros(3, 3);
        e[(0, 0)] = C64::new(1.0, 0.0);
        assert_eq!(c.matrix(), &e);

        let v = [1.0, -2.0, 0.5];
        let copies = DMatrix::from_fn(3, 4, |i, _| v[i]);
        let c = sample_covariance(&SignalEnsemble::from_real(copies).unwrap());
        let xv = DVector::from_row_slice(&v);
        assert_abs_diff_eq!((c.matrix().map(|z| z.re) - &xv * xv.transpose()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn true_covariance_examples() {
        let s = cycle(4);
        let b = SpectralBasis::from_shift(&s).unwrap();
        let id = true_covariance(&b, &GraphFilter::from_real(&[1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!((id.matrix() - CMatrix::identity(4, 4)).norm(), 0.0, epsilon = 1e-12);
        let shift_cov = true_covariance(&b, &GraphFilter::from_real(&[0.0, 1.0]).unwrap()).unwrap();
        let ssh = s.entries() * s.entries().adjoint();
        assert_abs_diff_eq!((shift_cov.matrix() - ssh).norm(), 0.0, epsilon = 1e-12);
        let f = GraphFilter::from_real(&[1.0, -0.5, 0.25]).unwrap();
        let h = filter_matrix(&s, &f).unwrap();
        let c = true_covariance(&b, &f).unwrap();
        assert_abs_diff_eq!((c.matrix() - &h * h.adjoint()).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_covariance_roundtrip_and_examples() {
        let s = path(3);
        let b = SpectralBasis::from_shift(&s).unwrap();
        let p = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let c = covariance_from_psd(&b, &p).unwrap();
        let back = psd_from_covariance(&b, &c).unwrap();
        assert_abs_diff_eq!((back.p - &p).norm(), 0.0, epsilon = 1e-10);

        let white = CovarianceMatrix::from_real(DMatrix::identity(3, 3) * 2.5).unwrap();
        assert!(psd_from_covariance(&b, &white).unwrap().p.iter().all(|&v| (v - 2.5).abs() < 1e-12));

        // a covariance used as its own shift has PSD equal to its eigenvalues
        let cmat = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 1.5]);
        let cshift = GraphShift::from_real(cmat.clone(), ShiftKind::Covariance).unwrap();
        let cb = SpectralBasis::from_shift(&cshift).unwrap();
        let pc = psd_from_covariance(&cb, &CovarianceMatrix::from_real(cmat).unwrap()).unwrap();
        for (got, lam) in pc.p.iter().zip(cb.lambda_real().unwrap()) {
            assert_abs_diff_eq!(*got, lam, epsilon = 1e-12);
        }
    }

    #[test]
    fn psd_clipping_rules() {
        let tiny = PsdEstimate::from_raw(DVector::from_vec(vec![1.0, -1e-12]), 1.0, PsdMethod::External).unwrap();
        assert_eq!(tiny.p[1], 0.0);
        assert!(matches!(
            PsdEstimate::from_raw(DVector::from_vec(vec![1.0, -1e-3]), 1.0, PsdMethod::External),
            Err(Error::NegativePsd { index: 1, .. })
        ));
    }

    #[test]
    fn covariance_validation() {
        assert!(CovarianceMatrix::from_real(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).is_err());
        assert!(CovarianceMatrix::from_real(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(CovarianceMatrix::from_real(DMatrix::identity(2, 2)).is_ok());
    }

    #[test]
    fn stationarity_metric_examples() {
        let b = SpectralBasis::from_shift(&path(4)).unwrap();
        let p = DVector::from_vec(vec![0.5, 1.0, 2.0, 4.0]);
        assert_abs_diff_eq!(stationarity_metric(&b, &covariance_from_psd(&b, &p).unwrap()).unwrap(), 1.0, epsilon = 1e-12);
        let id = CovarianceMatrix::from_real(DMatrix::identity(4, 4)).unwrap();
        assert_abs_diff_eq!(stationarity_metric(&b, &id).unwrap(), 1.0, epsilon = 1e-12);

        let diag = GraphShift::from_real(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])), ShiftKind::Custom)
            .unwrap();
        let bi = SpectralBasis::from_shift(&diag).unwrap();
        let ones = CovarianceMatrix::new_unchecked(CMatrix::from_element(2, 2, C64::new(1.0, 0.0)));
        assert_abs_diff_eq!(stationarity_metric(&bi, &ones).unwrap(), (0.5f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn shift_invariance_examples() {
        let s = path(5);
        let b = SpectralBasis::from_shift(&s).unwrap();
        let c = covariance_from_psd(&b, &DVector::from_vec(vec![1.0, 0.2, 3.0, 0.7, 1.1])).unwrap();
        for (a, bb, cc) in default_exponent_triples(4) {
            assert!(shift_invariance_residual(&s, &c, a, bb, cc).unwrap() < 1e-8);
        }
        assert!(matches!(shift_invariance_residual(&s, &c, 0, 1, 2), Err(Error::InvalidExponents { .. })));
        assert!(shift_invariance_residual(&s, &c, 11, 0, 0).is_err());
    }

    #[test]
    fn cycle_residual_recovers_time_stationarity() {
        let n = 6;
        let s = cycle(n);
        let b = SpectralBasis::from_shift(&s).unwrap();
        let f = GraphFilter::from_real(&[1.0, 0.5, -0.2]).unwrap();
        let c = true_covariance(&b, &f).unwrap();
        // E[x x^H] = E[S^l x (S^l x)^H]
        for l in 0..=n {
            assert!(shift_invariance_residual(&s, &c, 0, n, l).unwrap() < 1e-10);
        }
        // a non-circulant covariance breaks it
        let mut bad = c.matrix().clone();
        bad[(0, 0)] += C64::new(1.0, 0.0);
        let bad = CovarianceMatrix::new(bad).unwrap();
        assert!(shift_invariance_residual(&s, &bad, 0, n, 1).unwrap() > 0.01);
    }

    #[test]
    fn non_commuting_covariance_has_positive_residual() {
        let s = generate_graph(&GraphSpec::new(5, GraphFamily::ErdosRenyi { p: 0.6 }), 2).unwrap();
        let b = SpectralBasis::from_shift(&s).unwrap();
        // rotate the eigenvectors of a commuting covariance by a small angle
        let c = covariance_from_psd(&b, &DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
        let (cs, sn) = (0.9f64.cos(), 0.9f64.sin());
        let mut g = CMatrix::identity(5, 5);
        g[(0, 0)] = C64::new(cs, 0.0);
        g[(0, 1)] = C64::new(-sn, 0.0);
        g[(1, 0)] = C64::new(sn, 0.0);
        g[(1, 1)] = C64::new(cs, 0.0);
        let rotated = CovarianceMatrix::new(&g * c.matrix() * g.adjoint()).unwrap();
        assert!(shift_invariance_residual(&s, &rotated, 0, 1, 1).unwrap() > 0.01);
    }

    #[test]
    fn locality_examples() {
        let s = path(10);
        let b = SpectralBasis::from_shift(&s).unwrap();
        let white = CovarianceMatrix::from_real(DMatrix::identity(10, 10)).unwrap();
        assert!(locality_support_check(&s, &white, 1).unwrap().holds);
        let f = GraphFilter::from_real(&[1.0, 0.7]).unwrap();
        let c = true_covariance(&b, &f).unwrap();
        let report = locality_support_check(&s, &c, 2).unwrap();
        assert!(report.holds, "{:?}", report.violations);
        assert_eq!(report.radius, 2);
        // one tap too few and the check fails
        assert!(!locality_support_check(&s, &c, 1).unwrap().holds);
        let f3 = GraphFilter::from_real(&[1.0, 0.7, -0.4]).unwrap();
        let c3 = true_covariance(&b, &f3).unwrap();
        assert!(locality_support_check(&s, &c3, 3).unwrap().holds);
        assert!(!locality_support_check(&s, &c3, 2).unwrap().holds);

        let complete = generate_graph(&GraphSpec::new(5, GraphFamily::ErdosRenyi { p: 1.0 }), 0).unwrap();
        let dense = CovarianceMatrix::new_unchecked(CMatrix::from_element(5, 5, C64::new(1.0, 0.0)));
        assert!(locality_support_check(&complete, &dense, 2).unwrap().holds);
    }

    #[test]
    fn filtered_psd_examples() {
        let b = SpectralBasis::from_shift(&path(5)).unwrap();
        let p = DVector::from_vec(vec![1.0, 2.0, 0.5, 3.0, 0.1]);
        let id = GraphFilter::from_real(&[1.0]).unwrap();
        assert_eq!(filtered_psd(&b, &id, &p).unwrap(), p);
        let f = GraphFilter::from_real(&[0.5, 1.0]).unwrap();
        let g = GraphFilter::from_real(&[1.0, -0.3, 0.2]).unwrap();
        let ones = DVector::from_element(5, 1.0);
        let gain = filter_freq_response(&b, &f).unwrap().map(|z| z.norm_sqr());
        assert_abs_diff_eq!((filtered_psd(&b, &f, &ones).unwrap() - &gain).norm(), 0.0, epsilon = 1e-14);
        let cascade = filtered_psd(&b, &g, &filtered_psd(&b, &f, &p).unwrap()).unwrap();
        let gain_g = filter_freq_response(&b, &g).unwrap().map(|z| z.norm_sqr());
        let product = gain.component_mul(&gain_g).component_mul(&p);
        assert_abs_diff_eq!((cascade - product).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn filter_for_psd_realizes_target() {
        let s = generate_graph(&GraphSpec::new(6, GraphFamily::ErdosRenyi { p: 0.5 }), 4).unwrap();
        let b = SpectralBasis::from_shift(&s).unwrap();
        assert!(b.distinct_eigs());
        let p = DVector::from_vec(vec![0.3, 1.0, 2.0, 0.1, 0.8, 1.7]);
        let h = filter_for_psd(&b, &p).unwrap();
        let got = psd_from_covariance(&b, &true_covariance(&b, &h).unwrap()).unwrap();
        assert!((got.p - &p).norm() / p.norm() < 1e-6);
    }

    #[test]
    fn mean_removal_projects_out_eigenvector() {
        let s = generate_graph(&GraphSpec::new(5, GraphFamily::Path).laplacian(), 0).unwrap();
        let b = SpectralBasis::from_shift(&s).unwrap();
        // constant vector is the zero-frequency Laplacian eigenvector
        let x = DMatrix::from_fn(5, 2, |i, r| 3.0 + i as f64 * (r as f64 - 0.5));
        let ens = SignalEnsemble::from_real(x).unwrap().remove_mean_component(&b, 0).unwrap();
        let data = ens.real().unwrap();
        for r in 0..2 {
            assert!(data.column(r).sum().abs() < 1e-12);
        }
    }
}
