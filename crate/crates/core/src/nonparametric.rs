//! Nonparametric PSD estimators and their closed-form moments.
//!
//! Moment predictors come in two flavours. The symmetric formulas assume a
//! real eigenbasis, where `x̃ = V^H x` has `E[x̃ x̃^T] = diag(p)`. The normal
//! formulas use the pseudo-covariance `P = diag(√p) V^H V^* diag(√p)` of a
//! real Gaussian process on a general normal shift and reduce to the
//! symmetric ones when `V` is real.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::graphgen::{cluster_complete_linkage, equal_block_sizes, hop_distances, random_partition};
use crate::process::{frequency_diagonal, psd_from_frequency_diagonal, CovarianceMatrix, PsdEstimate, PsdMethod, Samples, SignalEnsemble};
use crate::spectral::{
    condition_number, power_columns, to_complex, CMatrix, CVector, GraphFilter, GraphShift, SpectralBasis, C64,
};

const ENERGY_TOL: f64 = 1e-8;

/// Largest condition number of `Ψ_L^H Ψ_L` accepted by the FIR design.
pub const FIR_MAX_GRAM_COND: f64 = 1e12;

/// Which Gaussian moment formulas a prediction used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentAssumption {
    /// Real eigenbasis: `E[x̃ x̃^T] = diag(p)`.
    SymmetricGaussian,
    /// Real Gaussian process on a normal shift, pseudo-covariance included.
    NormalGaussian,
}

/// `p̂ = (1/R) Σ_r |V^H x_r|²`.
pub fn periodogram(basis: &SpectralBasis, ens: &SignalEnsemble) -> Result<PsdEstimate> {
    check_dim(basis.n(), ens.n())?;
    let r = ens.r() as f64;
    let p = match (ens.samples(), basis.v_real()) {
        (Samples::Real(x), Some(v)) => {
            let xt = v.tr_mul(x);
            DVector::from_iterator(basis.n(), xt.row_iter().map(|row| row.norm_squared() / r))
        }
        _ => {
            let xt = basis.v().ad_mul(&ens.to_complex());
            DVector::from_iterator(basis.n(), xt.row_iter().map(|row| row.norm_squared() / r))
        }
    };
    Ok(PsdEstimate { p, method: PsdMethod::Periodogram { realizations: ens.r() } })
}

/// `p̂ = diag(V^H Ĉ V)`.
pub fn correlogram(basis: &SpectralBasis, cov: &CovarianceMatrix) -> Result<PsdEstimate> {
    psd_from_frequency_diagonal(frequency_diagonal(basis, cov)?, cov, PsdMethod::Correlogram)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodogramMoments {
    pub bias: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub mse: f64,
    pub assumption: MomentAssumption,
}

/// Zero bias, `Σ = (2/R) diag²(p)`, `MSE = (2/R)‖p‖²`.
pub fn predict_periodogram_moments(p: &DVector<f64>, r: usize) -> Result<PeriodogramMoments> {
    check_psd_input(p)?;
    check_realizations(r)?;
    let scale = 2.0 / r as f64;
    let covariance = DMatrix::from_diagonal(&p.map(|v| scale * v * v));
    Ok(PeriodogramMoments {
        bias: DVector::zeros(p.len()),
        mse: covariance.trace(),
        covariance,
        assumption: MomentAssumption::SymmetricGaussian,
    })
}

/// `Σ_ij = (1/R)(δ_ij p_i² + |P_ij|²)`.
pub fn predict_periodogram_moments_normal(basis: &SpectralBasis, p: &DVector<f64>, r: usize) -> Result<PeriodogramMoments> {
    check_dim(basis.n(), p.len())?;
    check_psd_input(p)?;
    check_realizations(r)?;
    if basis.is_real() {
        return predict_periodogram_moments(p, r);
    }
    let pseudo = pseudo_covariance(basis, p);
    let inv_r = 1.0 / r as f64;
    let covariance = DMatrix::from_fn(p.len(), p.len(), |i, j| {
        let direct = if i == j { p[i] * p[i] } else { 0.0 };
        inv_r * (direct + pseudo[(i, j)].norm_sqr())
    });
    Ok(PeriodogramMoments {
        bias: DVector::zeros(p.len()),
        mse: covariance.trace(),
        covariance,
        assumption: MomentAssumption::NormalGaussian,
    })
}

/// `E[x̃ x̃^T]` for a real process with PSD `p`.
fn pseudo_covariance(basis: &SpectralBasis, p: &DVector<f64>) -> CMatrix {
    let sq = p.map(f64::sqrt);
    let mut o = basis.conjugate_overlap();
    for i in 0..o.nrows() {
        for j in 0..o.ncols() {
            o[(i, j)] *= sq[i] * sq[j];
        }
    }
    o
}

fn check_psd_input(p: &DVector<f64>) -> Result<()> {
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::InvalidArgument("PSD must be finite and nonnegative".into()));
    }
    Ok(())
}

fn check_realizations(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    Ok(())
}

/// Rectangular or general vertex windows, each with energy `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowBank {
    #[serde(with = "crate::serde_vec::many")]
    windows: Vec<DVector<f64>>,
    /// Vertex blocks the windows were built from, when rectangular.
    pub labels: Option<Vec<Vec<usize>>>,
}

impl WindowBank {
    pub fn new(windows: Vec<DVector<f64>>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::EmptyBank);
        }
        let n = windows[0].len();
        for w in &windows {
            check_dim(n, w.len())?;
            let energy = w.norm_squared();
            if (energy - n as f64).abs() > ENERGY_TOL * n as f64 {
                return Err(Error::InvalidArgument(format!("window energy {energy} differs from N = {n}")));
            }
        }
        Ok(Self { windows, labels: None })
    }

    /// Rectangular windows `√(N/|block|)` on each block.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut windows = Vec::with_capacity(blocks.len());
        for block in &blocks {
            if block.is_empty() || block.iter().any(|&i| i >= n) {
                return Err(Error::InvalidArgument("window blocks must be nonempty vertex sets".into()));
            }
            let level = (n as f64 / block.len() as f64).sqrt();
            let mut w = DVector::zeros(n);
            for &i in block {
                w[i] = level;
            }
            windows.push(w);
        }
        let mut bank = Self::new(windows)?;
        bank.labels = Some(blocks);
        Ok(bank)
    }

    /// The single window `1`.
    pub fn identity(n: usize) -> Self {
        Self { windows: vec![DVector::from_element(n, 1.0)], labels: Some(vec![(0..n).collect()]) }
    }

    pub fn windows(&self) -> &[DVector<f64>] {
        &self.windows
    }

    pub fn m(&self) -> usize {
        self.windows.len()
    }

    pub fn n(&self) -> usize {
        self.windows[0].len()
    }
}

/// `W̃ = V^H diag(w) V`.
pub fn window_dual(basis: &SpectralBasis, w: &DVector<f64>) -> Result<CMatrix> {
    check_dim(basis.n(), w.len())?;
    let mut dw = basis.v().clone();
    for (i, mut row) in dw.row_iter_mut().enumerate() {
        row *= C64::new(w[i], 0.0);
    }
    Ok(basis.v().ad_mul(&dw))
}

fn window_dual_real(v: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut dw = v.clone();
    for (i, mut row) in dw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    v.tr_mul(&dw)
}

/// Frequency duals of a window bank and their pairwise mixing matrices.
#[derive(Clone, Debug)]
pub struct SpectrumMixing {
    pub w_tilde: Vec<CMatrix>,
}

impl SpectrumMixing {
    pub fn new(basis: &SpectralBasis, bank: &WindowBank) -> Result<Self> {
        check_dim(basis.n(), bank.n())?;
        let w_tilde = bank.windows().iter().map(|w| window_dual(basis, w)).collect::<Result<_>>()?;
        Ok(Self { w_tilde })
    }

    /// `W̃_mm' = W̃_m ∘ W̃_m'^*`.
    pub fn mixing(&self, m: usize, m2: usize) -> CMatrix {
        self.w_tilde[m].zip_map(&self.w_tilde[m2], |a, b| a * b.conj())
    }
}

/// `p̂ = (1/M) Σ_m |V^H diag(w_m) x|²` for one realization.
pub fn windowed_avg_periodogram(basis: &SpectralBasis, bank: &WindowBank, x: &CVector) -> Result<PsdEstimate> {
    check_dim(basis.n(), x.len())?;
    check_dim(basis.n(), bank.n())?;
    let n = basis.n();
    let m = bank.m() as f64;
    let mut acc = DVector::zeros(n);
    match (basis.v_real(), crate::spectral::as_real(x)) {
        (Some(v), Some(xr)) if x.iter().all(|z| z.im == 0.0) => {
            for w in bank.windows() {
                let y = v.tr_mul(&w.component_mul(&xr));
                acc += y.map(|c| c * c);
            }
        }
        _ => {
            for w in bank.windows() {
                let wx = CVector::from_iterator(n, w.iter().zip(x.iter()).map(|(a, b)| b * *a));
                let y = basis.v().ad_mul(&wx);
                acc += y.map(|c| c.norm_sqr());
            }
        }
    }
    acc /= m;
    Ok(PsdEstimate {
        p: acc,
        method: PsdMethod::WindowedAverage { windows: bank.m(), strategy: "custom".into() },
    })
}

/// Averages the windowed periodogram over every realization in `ens`.
pub fn windowed_avg_periodogram_ensemble(basis: &SpectralBasis, bank: &WindowBank, ens: &SignalEnsemble) -> Result<PsdEstimate> {
    let mut acc = DVector::zeros(basis.n());
    for r in 0..ens.r() {
        acc += windowed_avg_periodogram(basis, bank, &ens.column(r))?.p;
    }
    acc /= ens.r() as f64;
    Ok(PsdEstimate { p: acc, method: PsdMethod::WindowedAverage { windows: bank.m(), strategy: "custom".into() } })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowMoments {
    pub mean: DVector<f64>,
    pub bias: DVector<f64>,
    /// Trace of the estimator covariance.
    pub trace: f64,
    /// `‖bias‖² + trace`.
    pub mse: f64,
    pub assumption: MomentAssumption,
}

/// Mean `(1/M) Σ_m W̃_mm p`, bias, covariance trace and MSE of the windowed
/// average periodogram for Gaussian input.
///
/// A real basis uses `(2/M²) Σ_{m,m'} ‖W̃_mm' p‖²`; otherwise the
/// pseudo-covariance term is evaluated explicitly.
pub fn predict_window_moments(basis: &SpectralBasis, bank: &WindowBank, p: &DVector<f64>) -> Result<WindowMoments> {
    check_dim(basis.n(), p.len())?;
    check_dim(basis.n(), bank.n())?;
    check_psd_input(p)?;
    let n = basis.n();
    let m = bank.m();
    let inv_m2 = 1.0 / (m * m) as f64;
    let mut mean = DVector::zeros(n);
    let mut trace = 0.0;
    let assumption;
    if let Some(v) = basis.v_real() {
        assumption = MomentAssumption::SymmetricGaussian;
        let duals: Vec<DMatrix<f64>> = bank.windows().iter().map(|w| window_dual_real(v, w)).collect();
        // rows of W̃_m scaled by p, so [W̃_mm' p]_k = <row_k(W̃_m ∘ p), row_k(W̃_m')>
        let scaled: Vec<DMatrix<f64>> = duals
            .iter()
            .map(|d| {
                let mut s = d.clone();
                for (j, mut col) in s.column_iter_mut().enumerate() {
                    col *= p[j];
                }
                s
            })
            .collect();
        for a in 0..m {
            for b in a..m {
                let mixed = scaled[a].component_mul(&duals[b]).column_sum();
                let factor = if a == b { 1.0 } else { 2.0 };
                trace += factor * 2.0 * inv_m2 * mixed.norm_squared();
                if a == b {
                    mean += mixed;
                }
            }
        }
    } else {
        assumption = MomentAssumption::NormalGaussian;
        let mixing = SpectrumMixing::new(basis, bank)?;
        let pseudo = pseudo_covariance(basis, p);
        let pc = to_complex(p);
        let scaled: Vec<CMatrix> = mixing
            .w_tilde
            .iter()
            .map(|d| {
                let mut s = d.clone();
                for (j, mut col) in s.column_iter_mut().enumerate() {
                    col *= pc[j];
                }
                s
            })
            .collect();
        let with_pseudo: Vec<CMatrix> = mixing.w_tilde.iter().map(|d| d * &pseudo).collect();
        for a in 0..m {
            for b in 0..m {
                // [W̃_a diag(p) W̃_b^H]_kk and [W̃_a P W̃_b^T]_kk
                let direct = scaled[a].zip_map(&mixing.w_tilde[b], |x, y| x * y.conj()).column_sum();
                let conj = with_pseudo[a].component_mul(&mixing.w_tilde[b]).column_sum();
                trace += inv_m2 * (direct.norm_squared() + conj.norm_squared());
                if a == b {
                    mean += direct.map(|z| z.re);
                }
            }
        }
    }
    mean /= m as f64;
    let bias = &mean - p;
    let mse = bias.norm_squared() + trace;
    Ok(WindowMoments { mean, bias, trace, mse, assumption })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStrategy {
    /// Blocks from complete-linkage clustering of hop distances.
    Local,
    /// Equal-size blocks of randomly chosen vertices.
    Random,
}

impl WindowStrategy {
    pub fn name(self) -> &'static str {
        match self {
            WindowStrategy::Local => "local",
            WindowStrategy::Random => "random",
        }
    }
}

/// Rectangular windows of energy `N` on an `m`-block vertex partition.
pub fn design_windows(shift: &GraphShift, m: usize, strategy: WindowStrategy, seed: u64) -> Result<WindowBank> {
    let n = shift.n();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("window count {m} must lie in 1..={n}")));
    }
    let blocks = match strategy {
        WindowStrategy::Local => cluster_complete_linkage(&hop_distances(shift), m)?,
        WindowStrategy::Random => random_partition(n, &equal_block_sizes(n, m), seed)?,
    };
    WindowBank::from_blocks(n, blocks)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossTermReport {
    /// `Tr[(W̃_mm' p)(W̃_mm' p)^H] = ‖W̃_mm' p‖²`.
    pub terms: DMatrix<f64>,
    /// Window pairs whose supports are more than `2L` hops apart.
    pub far_pairs: Vec<(usize, usize)>,
    /// Largest cross term over the far pairs.
    pub max_far: f64,
}

/// Cross terms of the covariance trace, flagging the window pairs for which
/// a degree-`degree` generating filter forces them to vanish.
pub fn cross_term_check(
    shift: &GraphShift,
    basis: &SpectralBasis,
    bank: &WindowBank,
    p: &DVector<f64>,
    degree: usize,
) -> Result<CrossTermReport> {
    check_dim(shift.n(), basis.n())?;
    check_dim(basis.n(), p.len())?;
    let mixing = SpectrumMixing::new(basis, bank)?;
    let m = bank.m();
    let pc = to_complex(p);
    let terms = DMatrix::from_fn(m, m, |a, b| (mixing.mixing(a, b) * &pc).norm_squared());
    let dist = hop_distances(shift);
    let supports: Vec<Vec<usize>> =
        bank.windows().iter().map(|w| (0..w.len()).filter(|&i| w[i] != 0.0).collect()).collect();
    let mut far_pairs = Vec::new();
    let mut max_far: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            if a != b && dist.set_distance(&supports[a], &supports[b]) > 2 * degree {
                far_pairs.push((a, b));
                max_far = max_far.max(terms[(a, b)]);
            }
        }
    }
    Ok(CrossTermReport { terms, far_pairs, max_far })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BankDesign {
    IdealBandpass { b: usize },
    Fir { l: usize },
    Custom,
}

/// `N` frequency responses `q̃_k` of unit energy.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    responses: Vec<CVector>,
    pub design: BankDesign,
    /// Vertex-domain coefficients for FIR designs.
    pub filters: Option<Vec<GraphFilter>>,
}

impl FilterBank {
    pub fn new(responses: Vec<CVector>, design: BankDesign) -> Result<Self> {
        if responses.is_empty() {
            return Err(Error::EmptyBank);
        }
        let n = responses[0].len();
        check_dim(n, responses.len())?;
        for q in &responses {
            check_dim(n, q.len())?;
            if (q.norm_squared() - 1.0).abs() > ENERGY_TOL {
                return Err(Error::InvalidArgument("filter-bank responses must have unit energy".into()));
            }
        }
        Ok(Self { responses, design, filters: None })
    }

    pub fn responses(&self) -> &[CVector] {
        &self.responses
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    /// `|q̃_k|²` for every `k`, as rows.
    pub fn gains(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |k, i| self.responses[k][i].norm_sqr())
    }

    fn design_name(&self) -> String {
        match self.design {
            BankDesign::IdealBandpass { b } => format!("ideal:{b}"),
            BankDesign::Fir { l } => format!("fir:{l}"),
            BankDesign::Custom => "custom".into(),
        }
    }
}

/// `p̂_k = ‖diag(q̃_k) x̃‖²`.
pub fn filterbank_estimate(basis: &SpectralBasis, fb: &FilterBank, x: &CVector) -> Result<PsdEstimate> {
    check_dim(basis.n(), x.len())?;
    check_dim(basis.n(), fb.n())?;
    let power = basis.gft(x)?.map(|z| z.norm_sqr());
    Ok(PsdEstimate { p: fb.gains() * power, method: PsdMethod::FilterBank { design: fb.design_name() } })
}

/// Averages the filter-bank estimate over every realization in `ens`.
pub fn filterbank_estimate_ensemble(basis: &SpectralBasis, fb: &FilterBank, ens: &SignalEnsemble) -> Result<PsdEstimate> {
    check_dim(basis.n(), fb.n())?;
    let raw = crate::nonparametric::periodogram(basis, ens)?;
    Ok(PsdEstimate { p: fb.gains() * raw.p, method: PsdMethod::FilterBank { design: fb.design_name() } })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterBankMoments {
    pub mean: DVector<f64>,
    pub bias: DVector<f64>,
    pub variance: DVector<f64>,
    pub mse: f64,
    pub assumption: MomentAssumption,
}

/// `mean_k = (|q̃_k|²)^T p`, `var_k = 2‖diag(|q̃_k|²) p‖²`.
pub fn predict_filterbank_moments(fb: &FilterBank, p: &DVector<f64>) -> Result<FilterBankMoments> {
    check_dim(fb.n(), p.len())?;
    check_psd_input(p)?;
    let g = fb.gains();
    let mean = &g * p;
    let variance = DVector::from_iterator(p.len(), g.row_iter().map(|row| 2.0 * row.transpose().component_mul(p).norm_squared()));
    Ok(filterbank_moments(mean, variance, p, MomentAssumption::SymmetricGaussian))
}

/// As [`predict_filterbank_moments`] with the pseudo-covariance term
/// `Σ_ij g_i g_j |P_ij|²` replacing the second `‖g ∘ p‖²`.
pub fn predict_filterbank_moments_normal(basis: &SpectralBasis, fb: &FilterBank, p: &DVector<f64>) -> Result<FilterBankMoments> {
    check_dim(basis.n(), p.len())?;
    if basis.is_real() {
        return predict_filterbank_moments(fb, p);
    }
    check_dim(fb.n(), p.len())?;
    check_psd_input(p)?;
    let g = fb.gains();
    let mean = &g * p;
    let pseudo = pseudo_covariance(basis, p).map(|z| z.norm_sqr());
    let variance = DVector::from_iterator(
        p.len(),
        g.row_iter().map(|row| {
            let gk = row.transpose();
            gk.component_mul(p).norm_squared() + (gk.transpose() * &pseudo * &gk)[(0, 0)]
        }),
    );
    Ok(filterbank_moments(mean, variance, p, MomentAssumption::NormalGaussian))
}

fn filterbank_moments(mean: DVector<f64>, variance: DVector<f64>, p: &DVector<f64>, assumption: MomentAssumption) -> FilterBankMoments {
    let bias = &mean - p;
    let mse = bias.norm_squared() + variance.sum();
    FilterBankMoments { mean, bias, variance, mse, assumption }
}

/// For each `k`, unit response on `k` and the `B − 1` frequencies closest
/// to it in `|λ_k − λ_k'|` (ties by index), normalized to `1/√B`.
pub fn design_ideal_bandpass(basis: &SpectralBasis, b: usize) -> Result<FilterBank> {
    let n = basis.n();
    if b == 0 || b > n {
        return Err(Error::InvalidArgument(format!("bandwidth {b} must lie in 1..={n}")));
    }
    let lambda = basis.lambda();
    let level = C64::new(1.0 / (b as f64).sqrt(), 0.0);
    let mut responses = Vec::with_capacity(n);
    for k in 0..n {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            let di = if i == k { -1.0 } else { (lambda[i] - lambda[k]).norm() };
            let dj = if j == k { -1.0 } else { (lambda[j] - lambda[k]).norm() };
            di.total_cmp(&dj).then(i.cmp(&j))
        });
        let mut q = CVector::zeros(n);
        for &i in &order[..b] {
            q[i] = level;
        }
        responses.push(q);
    }
    FilterBank::new(responses, BankDesign::IdealBandpass { b })
}

/// Pre-normalization FIR responses `q̃_k = Ψ_L q_k` and their vertex-domain
/// taps, one pair per frequency; `[q̃_k]_k = 1`.
///
/// Each filter solves `min ‖Ψ_L q‖²` subject to `[Ψ_L q]_k = 1`, whose
/// solution is `q = G^{-1} ψ_k^* / (ψ_k^T G^{-1} ψ_k^*)` with `G = Ψ_L^H Ψ_L`
/// and `ψ_k^T` the k-th row of `Ψ_L`. It is evaluated through the thin QR
/// factorization of `Ψ_L`, built from eigenvalues rescaled to unit maximum
/// modulus.
pub fn fir_bandpass_solutions(basis: &SpectralBasis, l: usize) -> Result<Vec<(CVector, GraphFilter)>> {
    let n = basis.n();
    if l == 0 {
        return Err(Error::InvalidArgument("FIR design needs at least one tap".into()));
    }
    if l > n {
        return Err(Error::IllConditioned { cond: f64::INFINITY });
    }
    let scale = match basis.max_abs_eig() {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let psi = power_columns(basis.lambda().as_slice(), l, scale);
    let cond_psi = condition_number(&psi);
    let cond = cond_psi * cond_psi;
    if !cond.is_finite() || cond > FIR_MAX_GRAM_COND {
        return Err(Error::IllConditioned { cond });
    }
    let qr = psi.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let r_adj = r.adjoint();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let psi_k = psi.row(k).transpose().map(|z| z.conj());
        let u = r_adj
            .solve_lower_triangular(&psi_k)
            .ok_or_else(|| Error::NumericalFailure("singular triangular factor".into()))?;
        let denom = C64::new(u.norm_squared(), 0.0);
        let response = &q * &u / denom;
        let coeffs = r
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::NumericalFailure("singular triangular factor".into()))?
            / denom;
        let unscaled: Vec<C64> = coeffs.iter().enumerate().map(|(i, c)| c / scale.powi(i as i32)).collect();
        out.push((response, GraphFilter::new(unscaled)?));
    }
    Ok(out)
}

/// Minimum out-of-band power FIR bank with `L` taps, each response and its
/// taps scaled to unit energy.
pub fn design_fir_bandpass(basis: &SpectralBasis, l: usize) -> Result<FilterBank> {
    let mut responses = Vec::with_capacity(basis.n());
    let mut filters = Vec::with_capacity(basis.n());
    for (response, filter) in fir_bandpass_solutions(basis, l)? {
        let energy = response.norm();
        let taps: Vec<C64> = filter.coeffs().iter().map(|c| c / energy).collect();
        filters.push(GraphFilter::new(taps)?);
        responses.push(response / C64::new(energy, 0.0));
    }
    let mut bank = FilterBank::new(responses, BankDesign::Fir { l })?;
    bank.filters = Some(filters);
    Ok(bank)
}

/// Prior PSD used when a predictor needs an unknown spectrum.
pub fn flat_prior(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgen::{generate_graph, GraphFamily, GraphSpec};
    use crate::process::{generate_stationary, sample_covariance, true_covariance, covariance_from_psd, NoiseKind};
    use crate::spectral::{filter_freq_response, ShiftKind};
    use approx::assert_abs_diff_eq;

    fn path(n: usize) -> GraphShift {
        generate_graph(&GraphSpec::new(n, GraphFamily::Path), 0).unwrap()
    }

    fn basis(s: &GraphShift) -> SpectralBasis {
        SpectralBasis::from_shift(s).unwrap()
    }

    #[test]
    fn periodogram_with_identity_basis_is_squared_magnitude() {
        let s = GraphShift::from_real(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])), ShiftKind::Custom)
            .unwrap();
        let b = basis(&s);
        let x = DVector::from_vec(vec![2.0, -1.0, 0.5]);
        let ens = SignalEnsemble::from_real(DMatrix::from_column_slice(3, 1, x.as_slice())).unwrap();
        let p = periodogram(&b, &ens).unwrap();
        assert_abs_diff_eq!((p.p - x.map(|v| v * v)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn periodogram_equals_correlogram() {
        for (s, seed) in [(path(8), 1u64), (generate_graph(&GraphSpec::new(7, GraphFamily::DirectedCycle), 0).unwrap(), 2)] {
            let b = basis(&s);
            let f = GraphFilter::from_real(&[1.0, 0.4]).unwrap();
            let ens = generate_stationary(&s, &f, 13, NoiseKind::Gaussian, seed).unwrap();
            let pg = periodogram(&b, &ens).unwrap();
            let cg = correlogram(&b, &sample_covariance(&ens)).unwrap();
            assert!((pg.p - cg.p).amax() <= 1e-12);
        }
    }

    #[test]
    fn correlogram_examples() {
        let s = path(4);
        let b = basis(&s);
        let id = CovarianceMatrix::from_real(DMatrix::identity(4, 4)).unwrap();
        assert!(correlogram(&b, &id).unwrap().p.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let p = DVector::from_vec(vec![0.1, 2.0, 1.0, 3.0]);
        let c = covariance_from_psd(&b, &p).unwrap();
        assert_abs_diff_eq!((correlogram(&b, &c).unwrap().p - p).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn periodogram_moment_formulas() {
        let ones = DVector::from_element(6, 1.0);
        let m1 = predict_periodogram_moments(&ones, 1).unwrap();
        assert_abs_diff_eq!(m1.mse, 12.0, epsilon = 1e-12);
        let p = DVector::from_vec(vec![1.0, 3.0, 0.5]);
        let a = predict_periodogram_moments(&p, 4).unwrap();
        let b = predict_periodogram_moments(&p, 8).unwrap();
        assert_abs_diff_eq!(a.mse, 2.0 * b.mse, epsilon = 1e-12);
        assert_eq!(a.bias, DVector::zeros(3));
        assert!(predict_periodogram_moments(&p, 0).is_err());
    }

    #[test]
    fn normal_periodogram_moments_reduce_on_real_basis() {
        let b = basis(&path(5));
        let p = DVector::from_vec(vec![1.0, 2.0, 0.5, 0.1, 3.0]);
        let sym = predict_periodogram_moments(&p, 3).unwrap();
        let normal = predict_periodogram_moments_normal(&b, &p, 3).unwrap();
        assert_eq!(sym, normal);
    }

    #[test]
    fn cycle_periodogram_variance_pairs_conjugate_frequencies() {
        let n = 6;
        let s = generate_graph(&GraphSpec::new(n, GraphFamily::DirectedCycle), 0).unwrap();
        let b = basis(&s);
        let f = GraphFilter::from_real(&[1.0, 0.5]).unwrap();
        let p = filter_freq_response(&b, &f).unwrap().map(|z| z.norm_sqr());
        let m = predict_periodogram_moments_normal(&b, &p, 1).unwrap();
        for k in 0..n {
            let real_freq = b.lambda()[k].im.abs() < 1e-9;
            let factor = if real_freq { 2.0 } else { 1.0 };
            assert_abs_diff_eq!(m.covariance[(k, k)], factor * p[k] * p[k], epsilon = 1e-10);
        }
        // conjugate pair is fully correlated
        let k = (0..n).find(|&k| b.lambda()[k].im > 1e-9).unwrap();
        let j = (0..n).find(|&j| (b.lambda()[j] - b.lambda()[k].conj()).norm() < 1e-9).unwrap();
        assert_abs_diff_eq!(m.covariance[(k, j)], p[k] * p[j], epsilon = 1e-10);
    }

    #[test]
    fn identity_window_dual_and_reduction() {
        let s = path(5);
        let b = basis(&s);
        let one = DVector::from_element(5, 1.0);
        assert!((window_dual(&b, &one).unwrap() - CMatrix::identity(5, 5)).norm() < 1e-10);
        let x = CVector::from_vec(vec![1.0, -2.0, 0.3, 0.0, 4.0].into_iter().map(|v| C64::new(v, 0.0)).collect());
        let bank = WindowBank::identity(5);
        let wp = windowed_avg_periodogram(&b, &bank, &x).unwrap();
        let pg = b.gft(&x).unwrap().map(|z| z.norm_sqr());
        assert!((wp.p - pg).amax() < 1e-12);
        let zero = windowed_avg_periodogram(&b, &bank, &CVector::zeros(5)).unwrap();
        assert_eq!(zero.p, DVector::zeros(5));
    }

    #[test]
    fn window_dual_matches_direct_product() {
        let s = path(3);
        let b = basis(&s);
        let w = DVector::from_vec(vec![3f64.sqrt(), 0.0, 0.0]);
        let direct = b.v().adjoint() * DMatrix::from_diagonal(&w).map(|v| C64::new(v, 0.0)) * b.v();
        let dual = window_dual(&b, &w).unwrap();
        assert!((&dual - &direct).norm() < 1e-14);
        // rank one: W̃ = 3 v^T v with v the first row of V
        assert_abs_diff_eq!(dual.map(|z| z.re).rank(1e-10) as f64, 1.0);
        assert!(dual.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn window_bank_validation() {
        assert!(matches!(WindowBank::new(vec![]), Err(Error::EmptyBank)));
        assert!(WindowBank::new(vec![DVector::from_element(4, 0.5)]).is_err());
        let bank = WindowBank::from_blocks(5, vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        for w in bank.windows() {
            assert_abs_diff_eq!(w.norm_squared(), 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_identity_window_moments_match_periodogram() {
        let b = basis(&path(6));
        let p = DVector::from_vec(vec![1.0, 2.0, 0.5, 0.1, 3.0, 1.5]);
        let m = predict_window_moments(&b, &WindowBank::identity(6), &p).unwrap();
        assert!(m.bias.amax() < 1e-10);
        assert_abs_diff_eq!(m.trace, 2.0 * p.norm_squared(), epsilon = 1e-9);
    }

    #[test]
    fn single_window_mean_is_mixing_times_p() {
        let s = path(6);
        let b = basis(&s);
        let w = DVector::from_vec(vec![2.0, 1.0, 0.5, 0.5, 1.0, (6.0f64 - 6.5).abs().sqrt()]);
        let w = &w * (6.0 / w.norm_squared()).sqrt();
        let bank = WindowBank::new(vec![w.clone()]).unwrap();
        let p = DVector::from_vec(vec![1.0, 2.0, 0.5, 0.1, 3.0, 1.5]);
        let mix = SpectrumMixing::new(&b, &bank).unwrap().mixing(0, 0);
        let expected = (mix * to_complex(&p)).map(|z| z.re);
        let m = predict_window_moments(&b, &bank, &p).unwrap();
        assert!((m.mean - expected).amax() < 1e-12);
    }

    #[test]
    fn real_and_general_window_predictors_agree() {
        // a Hermitian shift with real eigenbasis solved by both code paths
        let s = path(6);
        let b = basis(&s);
        let bank = WindowBank::from_blocks(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let p = DVector::from_vec(vec![1.0, 2.0, 0.5, 0.1, 3.0, 1.5]);
        let fast = predict_window_moments(&b, &bank, &p).unwrap();
        let mixing = SpectrumMixing::new(&b, &bank).unwrap();
        let mut trace = 0.0;
        for a in 0..2 {
            for c in 0..2 {
                trace += 2.0 / 4.0 * (mixing.mixing(a, c) * to_complex(&p)).norm_squared();
            }
        }
        assert_abs_diff_eq!(fast.trace, trace, epsilon = 1e-10);
    }

    #[test]
    fn design_windows_examples() {
        let s = path(6);
        let one = design_windows(&s, 1, WindowStrategy::Local, 0).unwrap();
        assert_eq!(one.windows()[0], DVector::from_element(6, 1.0));
        let all = design_windows(&s, 6, WindowStrategy::Random, 3).unwrap();
        for w in all.windows() {
            assert_eq!(w.iter().filter(|&&v| v != 0.0).count(), 1);
            assert_abs_diff_eq!(w.amax(), 6f64.sqrt(), epsilon = 1e-12);
        }
        assert!(design_windows(&s, 7, WindowStrategy::Local, 0).is_err());
        assert!(design_windows(&s, 0, WindowStrategy::Local, 0).is_err());
    }

    #[test]
    fn local_windows_recover_cliques() {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in 0..5 {
                    if i != j {
                        edges.push((base + i, base + j, 1.0));
                    }
                }
            }
        }
        edges.push((4, 5, 1.0));
        edges.push((5, 4, 1.0));
        let s = GraphShift::adjacency_from_edges(10, &edges).unwrap();
        let bank = design_windows(&s, 2, WindowStrategy::Local, 0).unwrap();
        assert_eq!(bank.labels.as_ref().unwrap(), &vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
    }

    #[test]
    fn far_windows_have_zero_cross_terms() {
        let s = path(30);
        let b = basis(&s);
        let f = GraphFilter::from_real(&[1.0, 0.6, -0.3]).unwrap();
        let p = filter_freq_response(&b, &f).unwrap().map(|z| z.norm_sqr());
        let bank = WindowBank::from_blocks(30, vec![(0..10).collect(), (10..20).collect(), (20..30).collect()]).unwrap();
        let report = cross_term_check(&s, &b, &bank, &p, 2).unwrap();
        assert_eq!(report.far_pairs, vec![(0, 2), (2, 0)]);
        assert!(report.max_far <= 1e-10, "{}", report.max_far);
        assert!(report.terms[(0, 0)] > 0.0);
        assert!(report.terms[(0, 1)] > 1e-6);
    }

    #[test]
    fn filterbank_examples() {
        let s = path(5);
        let b = basis(&s);
        let x = CVector::from_vec(vec![1.0, -2.0, 0.3, 0.0, 4.0].into_iter().map(|v| C64::new(v, 0.0)).collect());
        let fb = design_ideal_bandpass(&b, 1).unwrap();
        let est = filterbank_estimate(&b, &fb, &x).unwrap();
        assert!((est.p - b.gft(&x).unwrap().map(|z| z.norm_sqr())).amax() < 1e-12);
        assert_eq!(filterbank_estimate(&b, &fb, &CVector::zeros(5)).unwrap().p, DVector::zeros(5));

        let p = DVector::from_vec(vec![1.0, 2.0, 0.5, 0.1, 3.0]);
        let m = predict_filterbank_moments(&fb, &p).unwrap();
        assert!((m.mean.clone() - &p).amax() < 1e-12);
        assert!((m.variance - p.map(|v| 2.0 * v * v)).amax() < 1e-12);

        let flat = design_ideal_bandpass(&b, 5).unwrap();
        let mf = predict_filterbank_moments(&flat, &p).unwrap();
        assert!(mf.mean.iter().all(|&v| (v - p.mean()).abs() < 1e-12));
    }

    #[test]
    fn ideal_bandpass_nearest_neighbours() {
        let s = path(5);
        let b = basis(&s);
        let fb = design_ideal_bandpass(&b, 3).unwrap();
        // path eigenvalues 2cos(πj/6) sorted ascending; gaps grow towards the edges
        let lam = b.lambda_real().unwrap();
        for k in 0..5 {
            let support: Vec<usize> = (0..5).filter(|&i| fb.responses()[k][i].norm() > 0.0).collect();
            let mut by_dist: Vec<usize> = (0..5).collect();
            by_dist.sort_by(|&i, &j| (lam[i] - lam[k]).abs().total_cmp(&(lam[j] - lam[k]).abs()).then(i.cmp(&j)));
            let mut expect = by_dist[..3].to_vec();
            expect.sort();
            assert_eq!(support, expect);
        }
        // equispaced spectrum: interior k takes its two neighbours
        let d = GraphShift::from_real(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0])), ShiftKind::Custom)
            .unwrap();
        let fb = design_ideal_bandpass(&basis(&d), 3).unwrap();
        let support = |k: usize| (0..4).filter(|&i| fb.responses()[k][i].norm() > 0.0).collect::<Vec<_>>();
        assert_eq!(support(0), vec![0, 1, 2]);
        assert_eq!(support(1), vec![0, 1, 2]);
        assert_eq!(support(2), vec![1, 2, 3]);
        assert_eq!(support(3), vec![1, 2, 3]);
    }

    #[test]
    fn fir_bank_full_length_is_identity() {
        let s = generate_graph(&GraphSpec::new(8, GraphFamily::DirectedCycle), 0).unwrap();
        let b = basis(&s);
        let fb = design_fir_bandpass(&b, 8).unwrap();
        for (k, q) in fb.responses().iter().enumerate() {
            let mut e = CVector::zeros(8);
            e[k] = C64::new(1.0, 0.0);
            assert!((q - e).norm() < 1e-8);
        }
    }

    #[test]
    fn fir_bank_single_tap_is_flat() {
        let b = basis(&path(5));
        let fb = design_fir_bandpass(&b, 1).unwrap();
        for q in fb.responses() {
            assert!(q.iter().all(|z| (z - C64::new(1.0 / 5f64.sqrt(), 0.0)).norm() < 1e-12));
        }
    }

    #[test]
    fn fir_bank_matches_explicit_kkt_solution() {
        let d = GraphShift::from_real(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 2.0])), ShiftKind::Custom)
            .unwrap();
        let b = basis(&d);
        let fb = design_fir_bandpass(&b, 2).unwrap();
        // Ψ = [1 0; 1 1; 1 2] in the raw variable, G = [3 3; 3 5]
        let psi = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let g_inv = (psi.transpose() * &psi).try_inverse().unwrap();
        for k in 0..3 {
            let row = psi.row(k).transpose();
            let q = &g_inv * &row / (row.transpose() * &g_inv * &row)[(0, 0)];
            let resp = &psi * q;
            assert_abs_diff_eq!(resp[k], 1.0, epsilon = 1e-12);
            let unit: DVector<f64> = &resp / resp.norm();
            let got: DVector<f64> = fb.responses()[k].map(|z| z.re);
            assert!((got - unit).amax() < 1e-10);
            let taps = fb.filters.as_ref().unwrap()[k].real_coeffs().unwrap();
            let rebuilt = &psi * DVector::from_vec(taps);
            assert!((rebuilt - &fb.responses()[k].map(|z| z.re)).amax() < 1e-10);
        }
    }

    #[test]
    fn fir_bank_rejects_singular_gram() {
        let id = GraphShift::from_real(DMatrix::identity(4, 4), ShiftKind::Custom).unwrap();
        assert!(matches!(design_fir_bandpass(&basis(&id), 2), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn covariance_of_filtered_process_has_expected_periodogram_mean() {
        let s = path(6);
        let b = basis(&s);
        let f = GraphFilter::from_real(&[1.0, 0.5]).unwrap();
        let truth = crate::process::psd_from_covariance(&b, &true_covariance(&b, &f).unwrap()).unwrap();
        let ens = generate_stationary(&s, &f, 20_000, NoiseKind::Gaussian, 5).unwrap();
        let est = periodogram(&b, &ens).unwrap();
        assert!((est.p - &truth.p).norm() / truth.p.norm() < 0.03);
    }
}
