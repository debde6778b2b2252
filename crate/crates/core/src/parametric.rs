//! MA, AR and ARMA models of a graph PSD and their fits.
//!
//! All fits work in the frequency domain on eigenvalues rescaled to unit
//! maximum modulus; coefficients are mapped back to the raw shift before
//! being returned. Coefficients are real.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::process::{frequency_diagonal, CovarianceMatrix, PsdEstimate, PsdMethod};
use crate::rng::{self, tags};
use crate::spectral::{CMatrix, CVector, GraphShift, SpectralBasis, C64};

/// Smallest admissible `|1 − A(λ_k)|`.
pub const EPS_POLE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaModel {
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub alpha0: f64,
    pub alphas: Vec<f64>,
}

/// PSD `|B(λ)|² / |1 − A(λ)|²` with `A(λ) = Σ_{m=1}^M a_m λ^m` and
/// `B(λ) = Σ_{l=0}^{L−1} b_l λ^l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ParametricModel {
    Ma(MaModel),
    Ar(ArModel),
    Arma(ArmaModel),
}

fn poly(coeffs: &[f64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// `1 − Σ_{m≥1} a_m z^m`.
fn denominator(a: &[f64], z: C64) -> C64 {
    C64::new(1.0, 0.0) - z * poly(a, z)
}

/// `p = |Ψ_L β|²`.
pub fn ma_psd(basis: &SpectralBasis, model: &MaModel) -> Result<PsdEstimate> {
    if model.beta.is_empty() || model.beta.len() > basis.n() {
        return Err(Error::InvalidArgument(format!("MA order {} must lie in 1..={}", model.beta.len(), basis.n())));
    }
    let p = basis.lambda().map(|lam| poly(&model.beta, lam).norm_sqr());
    PsdEstimate::new(p, PsdMethod::Model { model: "ma".into(), variant: "closed_form".into() })
}

/// `p = α₀² Π_m |1 − α_m λ|^{-2}`.
pub fn ar_psd(basis: &SpectralBasis, model: &ArModel) -> Result<PsdEstimate> {
    let mut p = DVector::from_element(basis.n(), model.alpha0 * model.alpha0);
    for &alpha in &model.alphas {
        for (k, lam) in basis.lambda().iter().enumerate() {
            let d = (C64::new(1.0, 0.0) - lam * alpha).norm();
            if d < EPS_POLE {
                return Err(Error::PoleOnGrid { index: k, value: d });
            }
            p[k] /= d * d;
        }
    }
    PsdEstimate::new(p, PsdMethod::Model { model: "ar".into(), variant: "closed_form".into() })
}

/// `p = |B(λ)|² / |1 − A(λ)|²`.
pub fn arma_psd(basis: &SpectralBasis, model: &ArmaModel) -> Result<PsdEstimate> {
    let mut p = DVector::zeros(basis.n());
    for (k, &lam) in basis.lambda().iter().enumerate() {
        let d = denominator(&model.a, lam).norm();
        if d < EPS_POLE {
            return Err(Error::PoleOnGrid { index: k, value: d });
        }
        p[k] = poly(&model.b, lam).norm_sqr() / (d * d);
    }
    PsdEstimate::new(p, PsdMethod::Model { model: "arma".into(), variant: "closed_form".into() })
}

pub fn model_psd(basis: &SpectralBasis, model: &ParametricModel) -> Result<PsdEstimate> {
    match model {
        ParametricModel::Ma(m) => ma_psd(basis, m),
        ParametricModel::Ar(m) => ar_psd(basis, m),
        ParametricModel::Arma(m) => arma_psd(basis, m),
    }
}

fn shift_polynomial(s: &CMatrix, coeffs: &[f64]) -> CMatrix {
    let n = s.nrows();
    let mut acc = CMatrix::zeros(n, n);
    for &c in coeffs.iter().rev() {
        acc = &acc * s;
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    acc
}

fn inverse(m: CMatrix) -> Result<CMatrix> {
    m.try_inverse().ok_or_else(|| Error::NumericalFailure("singular model denominator".into()))
}

/// Vertex-domain covariance of a model: `H H^H` for MA,
/// `α₀² Π (I − α_m S)^{-1} (I − α_m S)^{-H}` for AR and
/// `(I − A)^{-1} B B^H (I − A)^{-H}` for ARMA.
pub fn model_covariance(shift: &GraphShift, model: &ParametricModel) -> Result<CovarianceMatrix> {
    let s = shift.entries();
    let n = shift.n();
    let g = match model {
        ParametricModel::Ma(m) => shift_polynomial(s, &m.beta),
        ParametricModel::Ar(m) => {
            let mut g = CMatrix::identity(n, n) * C64::new(m.alpha0, 0.0);
            for &alpha in &m.alphas {
                g = inverse(CMatrix::identity(n, n) - s * C64::new(alpha, 0.0))? * g;
            }
            g
        }
        ParametricModel::Arma(m) => {
            let mut a_poly = vec![0.0];
            a_poly.extend(m.a.iter().map(|v| -v));
            a_poly[0] = 1.0;
            inverse(shift_polynomial(s, &a_poly))? * shift_polynomial(s, &m.b)
        }
    };
    let c = &g * g.adjoint();
    Ok(CovarianceMatrix::new_unchecked((&c + c.adjoint()).map(|z| z * 0.5)))
}

/// Settings for the multi-start descent fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self { restarts: 20, tol: 1e-8, max_iter: 10_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentSummary {
    pub objective: f64,
    pub best_restart: usize,
    pub iterations: usize,
    pub converged: bool,
}

struct Descent {
    x: DVector<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

/// Projected gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking. `eval` returns `None` outside the model's domain.
fn descend<E, P>(eval: &E, project: &P, x0: DVector<f64>, tol: f64, max_iter: usize) -> Descent
where
    E: Fn(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
    P: Fn(DVector<f64>) -> DVector<f64>,
{
    let mut x = project(x0);
    let Some((mut f, mut g)) = eval(&x) else {
        return Descent { x, f: f64::INFINITY, iterations: 0, converged: false };
    };
    let mut t = 1.0 / g.norm().max(1.0);
    for it in 0..max_iter {
        let pg = &x - project(&x - &g);
        if pg.norm() <= tol || f == 0.0 {
            return Descent { x, f, iterations: it, converged: true };
        }
        let mut step = None;
        for _ in 0..60 {
            let xn = project(&x - &g * t);
            let d = &xn - &x;
            if let Some((fnew, gnew)) = eval(&xn) {
                if fnew <= f + 1e-4 * g.dot(&d) {
                    step = Some((xn, fnew, gnew));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew)) = step else {
            return Descent { x, f, iterations: it, converged: true };
        };
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        t = if sy > 0.0 { (s.norm_squared() / sy).clamp(1e-12, 1e12) } else { (t * 2.0).min(1e12) };
        let stalled = f - fnew <= 1e-15 * f;
        x = xn;
        f = fnew;
        g = gnew;
        if stalled {
            return Descent { x, f, iterations: it + 1, converged: true };
        }
    }
    Descent { x, f, iterations: max_iter, converged: false }
}

/// Runs `restarts` descents from seeded starting points and keeps the lowest
/// objective (ties by restart index).
fn multi_start<E, P, I>(eval: E, project: P, init: I, cfg: &DescentConfig) -> (Descent, usize)
where
    E: Fn(&DVector<f64>) -> Option<(f64, DVector<f64>)> + Sync,
    P: Fn(DVector<f64>) -> DVector<f64> + Sync,
    I: Fn(&mut rng::Rng) -> DVector<f64> + Sync,
{
    let runs: Vec<Descent> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let mut g = rng::rng(rng::derive_seed(cfg.seed, tags::RESTARTS, i as u64));
            descend(&eval, &project, init(&mut g), cfg.tol, cfg.max_iter)
        })
        .collect();
    let (best, _) = runs
        .iter()
        .enumerate()
        .fold((0usize, f64::INFINITY), |(bi, bf), (i, d)| if d.f < bf { (i, d.f) } else { (bi, bf) });
    let best_run = runs.into_iter().nth(best).unwrap();
    (best_run, best)
}

fn check_p_hat(basis: &SpectralBasis, p_hat: &DVector<f64>) -> Result<()> {
    check_dim(basis.n(), p_hat.len())?;
    if p_hat.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::InvalidArgument("PSD estimate must be finite and nonnegative".into()));
    }
    Ok(())
}

fn check_order(order: usize, n: usize, what: &str) -> Result<()> {
    if order == 0 || order > n {
        return Err(Error::InvalidArgument(format!("{what} {order} must lie in 1..={n}")));
    }
    Ok(())
}

fn eig_scale(basis: &SpectralBasis) -> f64 {
    match basis.max_abs_eig() {
        s if s > 0.0 => s,
        _ => 1.0,
    }
}

fn unscale(coeffs: &[f64], scale: f64, offset: i32) -> Vec<f64> {
    coeffs.iter().enumerate().map(|(l, c)| c / scale.powi(l as i32 + offset)).collect()
}

fn flat_baseline(p_hat: &DVector<f64>) -> f64 {
    let mean = p_hat.mean();
    p_hat.iter().map(|v| (v - mean) * (v - mean)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaFit {
    pub model: MaModel,
    pub objective: f64,
    pub summary: DescentSummary,
}

/// Local minimizer of `‖p̂ − |Ψ_L β|²‖²` over real `β`.
///
/// The fit is identified only up to the sign of `β`.
pub fn ma_fit_freq(basis: &SpectralBasis, p_hat: &DVector<f64>, l: usize, cfg: &DescentConfig) -> Result<MaFit> {
    check_p_hat(basis, p_hat)?;
    check_order(l, basis.n(), "MA order")?;
    let level = p_hat.mean();
    if level == 0.0 {
        return Ok(MaFit {
            model: MaModel { beta: vec![0.0; l] },
            objective: 0.0,
            summary: DescentSummary { objective: 0.0, best_restart: 0, iterations: 0, converged: true },
        });
    }
    let scale = eig_scale(basis);
    let psi = crate::spectral::power_columns(basis.lambda().as_slice(), l, scale);
    let target = p_hat / level;
    let eval = |beta: &DVector<f64>| {
        let h = &psi * beta.map(|v| C64::new(v, 0.0));
        let r = DVector::from_iterator(h.len(), h.iter().zip(target.iter()).map(|(z, p)| z.norm_sqr() - p));
        let weighted = CVector::from_iterator(h.len(), h.iter().zip(r.iter()).map(|(z, ri)| z * *ri));
        let grad = psi.ad_mul(&weighted).map(|z| 4.0 * z.re);
        Some((r.norm_squared(), grad))
    };
    let sd = (1.0 / l as f64).sqrt();
    let init = |g: &mut rng::Rng| DVector::from_fn(l, |_, _| sd * g.sample::<f64, _>(StandardNormal));
    let (best, index) = multi_start(eval, |x| x, init, cfg);
    let objective = best.f * level * level;
    if objective > flat_baseline(p_hat) * (1.0 + 1e-9) + 1e-12 * p_hat.norm_squared() {
        return Err(Error::NoDescent { baseline: flat_baseline(p_hat) });
    }
    let beta: Vec<f64> = unscale(best.x.as_slice(), scale, 0).into_iter().map(|b| b * level.sqrt()).collect();
    Ok(MaFit {
        model: MaModel { beta },
        objective,
        summary: DescentSummary { objective, best_restart: index, iterations: best.iterations, converged: best.converged },
    })
}

/// Result of a linear least-squares fit of spectral coefficients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolynomialFit {
    /// `γ_l`, so that `C ≈ Σ_l γ_l S^l` and `p ≈ Σ_l γ_l λ^l`.
    pub gamma: Vec<f64>,
    pub psd: PsdEstimate,
    /// `‖Ĉ − Σ_l γ_l S^l‖_F`, or the frequency residual when fitted from a PSD.
    pub residual: f64,
    pub rank_deficient: bool,
    pub warnings: Vec<String>,
}

fn real_eigenvalues(basis: &SpectralBasis) -> Result<Vec<f64>> {
    if !basis.is_hermitian() {
        return Err(Error::NotSymmetric);
    }
    basis.lambda_real().ok_or(Error::NotSymmetric)
}

fn vandermonde_real(lambda: &[f64], cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(lambda.len(), cols, |k, l| (lambda[k] / scale).powi(l as i32))
}

/// Minimum-norm least squares, flagging numerical rank deficiency.
fn min_norm_ls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd.solve(b, eps).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    Ok((x, rank < a.ncols()))
}

fn polynomial_ls(lambda: &[f64], target: &DVector<f64>, cols: usize) -> Result<(Vec<f64>, DVector<f64>, bool, f64)> {
    let scale = lambda.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let psi = vandermonde_real(lambda, cols, scale);
    let (g, rank_deficient) = min_norm_ls(&psi, target)?;
    let fitted = &psi * &g;
    Ok((unscale(g.as_slice(), scale, 0), fitted, rank_deficient, scale))
}

fn rank_warning(rank_deficient: bool) -> Vec<String> {
    if rank_deficient {
        vec!["powers of the shift are linearly dependent; returned the minimum-norm solution".into()]
    } else {
        Vec::new()
    }
}

/// Symmetric-shift relaxation: `min_γ ‖Ĉ − Σ_{l=0}^{2(L−1)} γ_l S^l‖_F`.
///
/// With `S = V Λ V^T` orthogonal, this equals the frequency problem
/// `min_γ ‖diag(V^T Ĉ V) − Ψ_{2L−1} γ‖` plus the fixed off-diagonal energy.
pub fn ma_fit_symmetric(basis: &SpectralBasis, c_hat: &CovarianceMatrix, l: usize) -> Result<PolynomialFit> {
    check_dim(basis.n(), c_hat.n())?;
    let lambda = real_eigenvalues(basis)?;
    check_order(l, basis.n(), "MA order")?;
    let freq = basis.to_frequency(c_hat.matrix())?;
    let diag = DVector::from_iterator(basis.n(), (0..basis.n()).map(|k| freq[(k, k)].re));
    let mut off = 0.0;
    for i in 0..basis.n() {
        for j in 0..basis.n() {
            if i != j {
                off += freq[(i, j)].norm_sqr();
            } else {
                off += freq[(i, i)].im * freq[(i, i)].im;
            }
        }
    }
    let (gamma, fitted, rank_deficient, _) = polynomial_ls(&lambda, &diag, 2 * l - 1)?;
    let residual = ((&diag - &fitted).norm_squared() + off).sqrt();
    Ok(PolynomialFit {
        gamma,
        psd: clipped_model_psd(fitted, "ma", "symmetric"),
        residual,
        rank_deficient,
        warnings: rank_warning(rank_deficient),
    })
}

/// Same relaxation posed directly on a PSD estimate.
pub fn ma_fit_symmetric_psd(basis: &SpectralBasis, p_hat: &DVector<f64>, l: usize) -> Result<PolynomialFit> {
    check_p_hat(basis, p_hat)?;
    let lambda = real_eigenvalues(basis)?;
    check_order(l, basis.n(), "MA order")?;
    let (gamma, fitted, rank_deficient, _) = polynomial_ls(&lambda, p_hat, 2 * l - 1)?;
    let residual = (p_hat - &fitted).norm();
    Ok(PolynomialFit {
        gamma,
        psd: clipped_model_psd(fitted, "ma", "symmetric"),
        residual,
        rank_deficient,
        warnings: rank_warning(rank_deficient),
    })
}

fn clipped_model_psd(fitted: DVector<f64>, model: &str, variant: &str) -> PsdEstimate {
    PsdEstimate {
        p: fitted.map(|v| v.max(0.0)),
        method: PsdMethod::Model { model: model.into(), variant: variant.into() },
    }
}

/// Outcome of a nonnegative least-squares solve.
#[derive(Clone, Debug, PartialEq)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub residual: f64,
    /// Largest violation of the KKT conditions, relative to `‖A^T b‖`.
    pub kkt: f64,
}

/// Lawson-Hanson active-set solver for `min ‖A x − b‖` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsSolution> {
    check_dim(a.nrows(), b.len())?;
    let n = a.ncols();
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let scaled = DMatrix::from_fn(a.nrows(), n, |i, j| if norms[j] > 0.0 { a[(i, j)] / norms[j] } else { 0.0 });
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(NnlsSolution { x: DVector::zeros(n), residual: 0.0, kkt: 0.0 });
    }
    let tol = 1e-12 * bnorm;
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let usable: Vec<bool> = norms.iter().map(|&v| v > 0.0).collect();

    let solve_passive = |passive: &[bool]| -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(scaled.nrows(), idx.len(), |i, c| scaled[(i, idx[c])]);
        let (z, _) = min_norm_ls(&sub, b)?;
        let mut full = DVector::zeros(n);
        for (c, &j) in idx.iter().enumerate() {
            full[j] = z[c];
        }
        Ok(full)
    };

    for _ in 0..3 * n + 10 {
        let w = scaled.tr_mul(&(b - &scaled * &x));
        let candidate = (0..n)
            .filter(|&j| !passive[j] && usable[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _ in 0..3 * n + 10 {
            let z = solve_passive(&passive)?;
            if (0..n).filter(|&i| passive[i]).all(|i| z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && z[i] <= 0.0) {
                alpha = alpha.min(x[i] / (x[i] - z[i]));
            }
            x += (&z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol * 1e-3 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    let w = scaled.tr_mul(&(b - &scaled * &x));
    let kkt = (0..n)
        .map(|j| if x[j] > 0.0 { w[j].abs() } else { w[j].max(0.0) })
        .fold(0.0, f64::max)
        / scaled.tr_mul(b).norm().max(f64::MIN_POSITIVE);
    let residual = (b - &scaled * &x).norm();
    let x = DVector::from_fn(n, |j, _| if norms[j] > 0.0 { x[j] / norms[j] } else { 0.0 });
    Ok(NnlsSolution { x, residual, kkt })
}

fn nonneg_eigenvalues(basis: &SpectralBasis) -> Result<Vec<f64>> {
    let lambda = real_eigenvalues(basis)?;
    let min = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * basis.max_abs_eig().max(1.0) {
        return Err(Error::ShiftNotPsd { min_eig: min });
    }
    Ok(lambda.into_iter().map(|v| v.max(0.0)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonnegMaFit {
    pub model: MaModel,
    /// `‖√p̂ − Ψ_L β‖`.
    pub residual: f64,
    pub kkt: f64,
}

/// Convex restriction for positive semidefinite shifts:
/// `min_{β ≥ 0} ‖√p̂ − Ψ_L β‖`.
pub fn ma_fit_nonneg(basis: &SpectralBasis, p_hat: &DVector<f64>, l: usize) -> Result<NonnegMaFit> {
    check_p_hat(basis, p_hat)?;
    let lambda = nonneg_eigenvalues(basis)?;
    check_order(l, basis.n(), "MA order")?;
    let scale = lambda.iter().cloned().fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let psi = vandermonde_real(&lambda, l, scale);
    let sol = nnls(&psi, &p_hat.map(f64::sqrt))?;
    Ok(NonnegMaFit { model: MaModel { beta: unscale(sol.x.as_slice(), scale, 0) }, residual: sol.residual, kkt: sol.kkt })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArFit {
    pub model: ArModel,
    pub objective: f64,
    pub summary: DescentSummary,
}

/// `|1 − α λ|^{-2}` products and the closed-form gain for a set of rates.
fn ar_profile(lambda: &CVector, alphas: &[f64], p_hat: &DVector<f64>) -> Option<(DVector<f64>, f64, f64)> {
    let mut g = DVector::from_element(lambda.len(), 1.0);
    for &alpha in alphas {
        for (k, lam) in lambda.iter().enumerate() {
            let d = (C64::new(1.0, 0.0) - lam * alpha).norm_sqr();
            if d < EPS_POLE * EPS_POLE {
                return None;
            }
            g[k] /= d;
        }
    }
    let gg = g.norm_squared();
    let gain = (g.dot(p_hat) / gg).max(0.0);
    let objective = (p_hat - &g * gain).norm_squared();
    Some((g, gain, objective))
}

/// Fits `α₀² Π_m |1 − α_m λ|^{-2}` to `p̂`.
///
/// Order one scans a 101-point grid over `|α| ≤ 0.99/max|λ|`, solves `α₀²`
/// in closed form at each point and refines by golden-section search. Higher
/// orders run multi-start projected descent on the same box with `α₀²`
/// profiled out.
pub fn ar_fit(basis: &SpectralBasis, p_hat: &DVector<f64>, m: usize, cfg: &DescentConfig) -> Result<ArFit> {
    check_p_hat(basis, p_hat)?;
    if m == 0 {
        return Err(Error::InvalidArgument("AR order must be positive".into()));
    }
    let lambda = basis.lambda();
    let bound = 0.99 / eig_scale(basis);
    let level = p_hat.mean();
    if level == 0.0 {
        return Ok(ArFit {
            model: ArModel { alpha0: 0.0, alphas: vec![0.0; m] },
            objective: 0.0,
            summary: DescentSummary { objective: 0.0, best_restart: 0, iterations: 0, converged: true },
        });
    }
    let target = p_hat / level;
    let objective_of = |alphas: &[f64]| ar_profile(lambda, alphas, &target).map(|(_, _, f)| f).unwrap_or(f64::INFINITY);

    let (alphas, f, summary) = if m == 1 {
        let grid: Vec<f64> = (0..101).map(|i| -bound + 2.0 * bound * i as f64 / 100.0).collect();
        let values: Vec<f64> = grid.iter().map(|&a| objective_of(&[a])).collect();
        let best = (0..grid.len()).fold(0, |b, i| if values[i] < values[b] { i } else { b });
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let (alpha, f) = golden_section(|a| objective_of(&[a]), lo, hi, 1e-12);
        let (alpha, f) = if f <= values[best] { (alpha, f) } else { (grid[best], values[best]) };
        (vec![alpha], f, DescentSummary { objective: f, best_restart: 0, iterations: 101, converged: true })
    } else {
        let eval = |alphas: &DVector<f64>| {
            let (g, gain, f) = ar_profile(lambda, alphas.as_slice(), &target)?;
            let r = &target - &g * gain;
            let grad = DVector::from_fn(m, |j, _| {
                let a = alphas[j];
                let dg = DVector::from_fn(lambda.len(), |k, _| {
                    let lam = lambda[k];
                    let d = (C64::new(1.0, 0.0) - lam * a).norm_sqr();
                    g[k] * (2.0 * lam.re - 2.0 * a * lam.norm_sqr()) / d
                });
                -2.0 * gain * r.dot(&dg)
            });
            Some((f, grad))
        };
        let project = |x: DVector<f64>| x.map(|v| v.clamp(-bound, bound));
        let init = |g: &mut rng::Rng| DVector::from_fn(m, |_, _| g.random_range(-bound..bound));
        let (best, index) = multi_start(eval, project, init, cfg);
        let f = best.f;
        let summary = DescentSummary { objective: f, best_restart: index, iterations: best.iterations, converged: best.converged };
        (best.x.as_slice().to_vec(), f, summary)
    };
    if !f.is_finite() {
        return Err(Error::NoDescent { baseline: flat_baseline(p_hat) });
    }
    let (_, gain, _) = ar_profile(lambda, &alphas, &target).ok_or(Error::NoDescent { baseline: flat_baseline(p_hat) })?;
    let objective = f * level * level;
    Ok(ArFit {
        model: ArModel { alpha0: (gain * level).sqrt(), alphas },
        objective,
        summary: DescentSummary { objective, ..summary },
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmaVariant {
    /// Linear LS over the lifted coefficients of `|1 − A|²` and `|B|²`.
    Relaxed,
    /// Nonnegative LS on `|1 − A| √p̂ ≈ B` for positive semidefinite shifts.
    Nonneg,
}

impl ArmaVariant {
    pub fn name(self) -> &'static str {
        match self {
            ArmaVariant::Relaxed => "relaxed",
            ArmaVariant::Nonneg => "nonneg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmaFit {
    pub variant: ArmaVariant,
    /// Factored model, when the variant produces one.
    pub model: Option<ArmaModel>,
    /// Lifted coefficients `(d, c)` with `|1 − A|² = 1 − Σ_j d_j λ^j` and
    /// `|B|² = Σ_l c_l λ^l` (relaxed variant).
    pub lifted: Option<(Vec<f64>, Vec<f64>)>,
    pub psd: PsdEstimate,
    pub objective: f64,
    /// Frequencies where the lifted denominator is not positive; the
    /// estimate falls back to `p̂` there.
    pub pole_violations: Vec<usize>,
    pub rank_deficient: bool,
    pub warnings: Vec<String>,
}

/// Equation-error ARMA fits with `m` poles and `l` numerator taps.
///
/// The relaxed variant minimizes `‖|1 − A|² ∘ p̂ − |B|²‖` over the lifted
/// coefficients, which is linear. The nonnegative variant minimizes
/// `‖|1 − A| ∘ √p̂ − B‖` over `a, b ≥ 0`. For `λ ≥ 0` the sign of `1 − A(λ)`
/// changes at most once along the sorted spectrum, so the problem splits into
/// `N + 1` NNLS problems, one per sign threshold, and the best of them is the
/// global optimum.
pub fn arma_fit_ls(basis: &SpectralBasis, p_hat: &DVector<f64>, m: usize, l: usize, variant: ArmaVariant) -> Result<ArmaFit> {
    check_p_hat(basis, p_hat)?;
    check_order(l, basis.n(), "numerator order")?;
    match variant {
        ArmaVariant::Relaxed => arma_relaxed(basis, p_hat, m, l),
        ArmaVariant::Nonneg => arma_nonneg(basis, p_hat, m, l),
    }
}

fn arma_relaxed(basis: &SpectralBasis, p_hat: &DVector<f64>, m: usize, l: usize) -> Result<ArmaFit> {
    let lambda = real_eigenvalues(basis)?;
    if m == 0 {
        let fit = ma_fit_symmetric_psd(basis, p_hat, l)?;
        return Ok(ArmaFit {
            variant: ArmaVariant::Relaxed,
            model: None,
            lifted: Some((Vec::new(), fit.gamma)),
            psd: fit.psd,
            objective: fit.residual * fit.residual,
            pole_violations: Vec::new(),
            rank_deficient: fit.rank_deficient,
            warnings: fit.warnings,
        });
    }
    let n = basis.n();
    let scale = lambda.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let dcols = 2 * m;
    let ccols = 2 * l - 1;
    let design = DMatrix::from_fn(n, dcols + ccols, |k, j| {
        let z = lambda[k] / scale;
        if j < dcols {
            z.powi(j as i32 + 1) * p_hat[k]
        } else {
            z.powi((j - dcols) as i32)
        }
    });
    let (coef, rank_deficient) = min_norm_ls(&design, p_hat)?;
    let objective = (p_hat - &design * &coef).norm_squared();
    let mut p = DVector::zeros(n);
    let mut pole_violations = Vec::new();
    for k in 0..n {
        let z = lambda[k] / scale;
        let den = 1.0 - (0..dcols).map(|j| coef[j] * z.powi(j as i32 + 1)).sum::<f64>();
        let num = (0..ccols).map(|j| coef[dcols + j] * z.powi(j as i32)).sum::<f64>();
        if den > EPS_POLE {
            p[k] = num.max(0.0) / den;
        } else {
            pole_violations.push(k);
            p[k] = p_hat[k];
        }
    }
    let d = unscale(&coef.as_slice()[..dcols], scale, 1);
    let c = unscale(&coef.as_slice()[dcols..], scale, 0);
    let mut warnings = rank_warning(rank_deficient);
    if !pole_violations.is_empty() {
        warnings.push(format!("{} frequencies fell back to the raw estimate", pole_violations.len()));
    }
    Ok(ArmaFit {
        variant: ArmaVariant::Relaxed,
        model: None,
        lifted: Some((d, c)),
        psd: PsdEstimate { p, method: PsdMethod::Model { model: "arma".into(), variant: "relaxed".into() } },
        objective,
        pole_violations,
        rank_deficient,
        warnings,
    })
}

fn arma_nonneg(basis: &SpectralBasis, p_hat: &DVector<f64>, m: usize, l: usize) -> Result<ArmaFit> {
    let lambda = nonneg_eigenvalues(basis)?;
    let n = basis.n();
    let sqrt_p = p_hat.map(f64::sqrt);
    if m == 0 {
        let fit = ma_fit_nonneg(basis, p_hat, l)?;
        let model = ArmaModel { a: Vec::new(), b: fit.model.beta };
        return Ok(ArmaFit {
            variant: ArmaVariant::Nonneg,
            psd: relabel(arma_psd(basis, &model)?, "nonneg"),
            model: Some(model),
            lifted: None,
            objective: fit.residual * fit.residual,
            pole_violations: Vec::new(),
            rank_deficient: false,
            warnings: Vec::new(),
        });
    }
    let scale = lambda.iter().cloned().fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let z: Vec<f64> = lambda.iter().map(|v| v / scale).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[i].total_cmp(&z[j]).then(i.cmp(&j)));
    let mut rank = vec![0; n];
    for (pos, &k) in order.iter().enumerate() {
        rank[k] = pos;
    }
    let true_objective = |x: &DVector<f64>| -> (f64, bool) {
        let mut f = 0.0;
        let mut pole = false;
        for k in 0..n {
            let a_val: f64 = (0..m).map(|j| x[j] * z[k].powi(j as i32 + 1)).sum();
            let b_val: f64 = (0..l).map(|j| x[m + j] * z[k].powi(j as i32)).sum();
            let d = (1.0 - a_val).abs();
            pole |= d < EPS_POLE;
            f += (d * sqrt_p[k] - b_val).powi(2);
        }
        (f, pole)
    };
    let candidates: Vec<(usize, DVector<f64>, f64, bool)> = (0..=n)
        .into_par_iter()
        .map(|t| {
            let s: Vec<f64> = (0..n).map(|k| if rank[k] < t { 1.0 } else { -1.0 }).collect();
            let design = DMatrix::from_fn(n, m + l, |k, j| {
                if j < m {
                    s[k] * sqrt_p[k] * z[k].powi(j as i32 + 1)
                } else {
                    z[k].powi((j - m) as i32)
                }
            });
            let target = DVector::from_fn(n, |k, _| s[k] * sqrt_p[k]);
            let x = nnls(&design, &target).map(|sol| sol.x).unwrap_or_else(|_| DVector::zeros(m + l));
            let (f, pole) = true_objective(&x);
            (t, x, f, pole)
        })
        .collect();
    let best = candidates
        .iter()
        .filter(|c| !c.3)
        .fold(None::<&(usize, DVector<f64>, f64, bool)>, |acc, c| match acc {
            Some(b) if b.2 <= c.2 => Some(b),
            _ => Some(c),
        });
    let Some((_, x, objective, _)) = best else {
        return Err(Error::PoleOnGrid { index: 0, value: 0.0 });
    };
    let model = ArmaModel { a: unscale(&x.as_slice()[..m], scale, 1), b: unscale(&x.as_slice()[m..], scale, 0) };
    Ok(ArmaFit {
        variant: ArmaVariant::Nonneg,
        psd: relabel(arma_psd(basis, &model)?, "nonneg"),
        model: Some(model),
        lifted: None,
        objective: *objective,
        pole_violations: Vec::new(),
        rank_deficient: false,
        warnings: Vec::new(),
    })
}

fn relabel(mut psd: PsdEstimate, variant: &str) -> PsdEstimate {
    psd.method = PsdMethod::Model { model: "arma".into(), variant: variant.into() };
    psd
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmaRatioFit {
    pub model: ArmaModel,
    pub objective: f64,
    pub summary: DescentSummary,
}

/// Direct ratio objective `‖p̂ − |B|² / |1 − A|²‖²` by multi-start descent.
pub fn arma_fit_ratio(basis: &SpectralBasis, p_hat: &DVector<f64>, m: usize, l: usize, cfg: &DescentConfig) -> Result<ArmaRatioFit> {
    check_p_hat(basis, p_hat)?;
    check_order(l, basis.n(), "numerator order")?;
    let level = p_hat.mean();
    if level == 0.0 {
        return Ok(ArmaRatioFit {
            model: ArmaModel { a: vec![0.0; m], b: vec![0.0; l] },
            objective: 0.0,
            summary: DescentSummary { objective: 0.0, best_restart: 0, iterations: 0, converged: true },
        });
    }
    let scale = eig_scale(basis);
    let z: Vec<C64> = basis.lambda().iter().map(|lam| lam / scale).collect();
    let target = p_hat / level;
    let n = z.len();
    let eval = |x: &DVector<f64>| {
        let a = &x.as_slice()[..m];
        let b = &x.as_slice()[m..];
        let mut f = 0.0;
        let mut grad = DVector::zeros(m + l);
        for k in 0..n {
            let d = denominator(a, z[k]);
            let dn = d.norm_sqr();
            if dn < EPS_POLE * EPS_POLE {
                return None;
            }
            let bv = poly(b, z[k]);
            let p = bv.norm_sqr() / dn;
            let r = p - target[k];
            f += r * r;
            let mut zp = z[k];
            for j in 0..m {
                grad[j] += 2.0 * r * 2.0 * bv.norm_sqr() * (d.conj() * zp).re / (dn * dn);
                zp *= z[k];
            }
            let mut zp = C64::new(1.0, 0.0);
            for j in 0..l {
                grad[m + j] += 2.0 * r * 2.0 * (bv.conj() * zp).re / dn;
                zp *= z[k];
            }
        }
        Some((f, grad))
    };
    let sd_b = (1.0 / l as f64).sqrt();
    let sd_a = if m > 0 { 0.1 / m as f64 } else { 0.0 };
    let init = |g: &mut rng::Rng| {
        DVector::from_fn(m + l, |j, _| {
            let sd = if j < m { sd_a } else { sd_b };
            sd * g.sample::<f64, _>(StandardNormal)
        })
    };
    let (best, index) = multi_start(eval, |x| x, init, cfg);
    if !best.f.is_finite() {
        return Err(Error::NoDescent { baseline: flat_baseline(p_hat) });
    }
    let objective = best.f * level * level;
    let a = unscale(&best.x.as_slice()[..m], scale, 1);
    let b: Vec<f64> = unscale(&best.x.as_slice()[m..], scale, 0).into_iter().map(|v| v * level.sqrt()).collect();
    Ok(ArmaRatioFit {
        model: ArmaModel { a, b },
        objective,
        summary: DescentSummary { objective, best_restart: index, iterations: best.iterations, converged: best.converged },
    })
}

/// Frequency residual `‖diag(V^H C V) − p‖` of a covariance against a model PSD.
pub fn psd_consistency(basis: &SpectralBasis, cov: &CovarianceMatrix, p: &DVector<f64>) -> Result<f64> {
    Ok((frequency_diagonal(basis, cov)? - p).norm())
}
