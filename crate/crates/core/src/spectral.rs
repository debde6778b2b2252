//! Graph shift operators, their unitary eigendecomposition, the graph Fourier
//! transform, Vandermonde frequency matrices and polynomial graph filters.
//!
//! A shift `S` is any normal matrix whose sparsity pattern follows the graph
//! (adjacency, Laplacian, covariance, precision, ...). Decomposing it gives
//! `S = V diag(λ) V^H` with `V` unitary; the GFT of a signal is `V^H x` and a
//! filter `H = Σ_l h_l S^l` acts in frequency as the pointwise product with
//! `Ψ_L h`, where `Ψ_L` holds the first `L` powers of the eigenvalues.
//!
//! All arithmetic is complex. Real-symmetric shifts additionally keep real
//! copies of `S` and `V` so that batch operations can use real products.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
/// A graph signal: one value per node.
pub type GraphSignal = CVector;

/// Default relative tolerance on `‖SS^H − S^HS‖_F / ‖S‖_F²`.
pub const DEFAULT_NORMALITY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this times `max|λ|` count as repeated.
pub const DISTINCT_EIG_REL_TOL: f64 = 1e-8;

// Generic weight for the skew part when diagonalizing a non-Hermitian normal
// shift through the Hermitian combination `H + c K`.
const SKEW_MIX: f64 = 0.618_033_988_749_894_9;
const EIGEN_MAX_ITER: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Adjacency,
    Laplacian,
    Covariance,
    Precision,
    Custom,
}

/// A dense graph shift operator.
#[derive(Clone, Debug)]
pub struct GraphShift {
    entries: CMatrix,
    real: Option<DMatrix<f64>>,
    kind: ShiftKind,
}

impl GraphShift {
    pub fn from_real(entries: DMatrix<f64>, kind: ShiftKind) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("shift entries must be finite".into()));
        }
        Ok(Self {
            entries: entries.map(|v| C64::new(v, 0.0)),
            real: Some(entries),
            kind,
        })
    }

    pub fn from_complex(entries: CMatrix, kind: ShiftKind) -> Result<Self> {
        if entries.iter().all(|z| z.im == 0.0) {
            return Self::from_real(entries.map(|z| z.re), kind);
        }
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("shift entries must be finite".into()));
        }
        Ok(Self { entries, real: None, kind })
    }

    /// Adjacency shift from directed weighted edges `(src, dst, w)`; the
    /// entry `S[dst][src]` receives `w`, so `(Sx)_i` aggregates in-neighbours.
    pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_real(edge_matrix(n, edges)?, ShiftKind::Adjacency)
    }

    /// Combinatorial Laplacian `D − A` with `D` the weighted in-degree.
    pub fn laplacian_from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let a = edge_matrix(n, edges)?;
        Self::from_real(laplacian_of(&a), ShiftKind::Laplacian)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Real entries, when every entry is real.
    pub fn real_entries(&self) -> Option<&DMatrix<f64>> {
        self.real.as_ref()
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.entries.norm().max(f64::MIN_POSITIVE);
        (&self.entries - self.entries.adjoint()).norm() <= 1e-14 * scale
    }

    pub fn is_real_symmetric(&self) -> bool {
        self.real.is_some() && self.is_hermitian()
    }

    /// `‖S S^H − S^H S‖_F / ‖S‖_F²` (zero for the zero matrix).
    pub fn normality_residual(&self) -> f64 {
        let s = &self.entries;
        let sh = s.adjoint();
        let num = (s * &sh - &sh * s).norm();
        let den = s.norm_squared();
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// `S x`.
    pub fn apply(&self, x: &CVector) -> Result<CVector> {
        check_dim(self.n(), x.len())?;
        Ok(&self.entries * x)
    }

    /// `S^H x`.
    pub fn apply_adjoint(&self, x: &CVector) -> Result<CVector> {
        check_dim(self.n(), x.len())?;
        Ok(self.entries.adjoint() * x)
    }

    /// Neighbour lists of the undirected support of `S` (diagonal ignored).
    pub fn support_neighbors(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut out = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && (self.entries[(i, j)] != C64::new(0.0, 0.0) || self.entries[(j, i)] != C64::new(0.0, 0.0)) {
                    out[i].push(j);
                }
            }
        }
        out
    }

    /// Undirected `(i, j, w)` edges with `i < j`, plus directed ones where the
    /// support is asymmetric. Used for edge-list serialization.
    pub fn edges(&self) -> Vec<(usize, usize, C64)> {
        let adjacency = match self.kind {
            ShiftKind::Laplacian => self.entries.map(|z| -z),
            _ => self.entries.clone(),
        };
        let n = self.n();
        let mut out = Vec::new();
        for dst in 0..n {
            for src in 0..n {
                if src != dst && adjacency[(dst, src)] != C64::new(0.0, 0.0) {
                    out.push((src, dst, adjacency[(dst, src)]));
                }
            }
        }
        out.sort_by_key(|&(s, d, _)| (s, d));
        out
    }
}

fn edge_matrix(n: usize, edges: &[(usize, usize, f64)]) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(n, n);
    for &(src, dst, w) in edges {
        if src >= n || dst >= n {
            return Err(Error::InvalidArgument(format!(
                "edge ({src}, {dst}) out of range for {n} nodes"
            )));
        }
        if !w.is_finite() {
            return Err(Error::InvalidArgument("edge weights must be finite".into()));
        }
        a[(dst, src)] = w;
    }
    Ok(a)
}

pub(crate) fn laplacian_of(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = 0.0;
        let deg: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        l[(i, i)] = deg;
    }
    l
}

/// Unitary eigendecomposition of a normal shift.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    v: CMatrix,
    v_real: Option<DMatrix<f64>>,
    lambda: CVector,
    distinct_eigs: bool,
    hermitian: bool,
}

/// Decomposes a normal shift; eigenvalues come out sorted by real part, then
/// imaginary part, and each eigenvector is phase-normalized so that its
/// largest-modulus entry is real and positive.
pub fn decompose(shift: &GraphShift, tol: f64) -> Result<SpectralBasis> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("normality tolerance must be positive".into()));
    }
    let residual = shift.normality_residual();
    if residual > tol {
        return Err(Error::NotNormal { residual, tol });
    }
    let n = shift.n();
    let s = shift.entries();
    let hermitian = shift.is_hermitian();

    let (mut v, lambda): (CMatrix, Vec<C64>) = if let (true, Some(real)) = (hermitian, shift.real_entries()) {
        let sym = (real + real.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
        let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
        let lambda = eig.eigenvalues.iter().map(|&x| C64::new(x, 0.0)).collect();
        (v, lambda)
    } else if hermitian {
        let herm = (s + s.adjoint()).map(|z| z * 0.5);
        let eig = SymmetricEigen::try_new(herm, f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
        let lambda = eig.eigenvalues.iter().map(|&x| C64::new(x, 0.0)).collect();
        (eig.eigenvectors, lambda)
    } else {
        // S normal => its Hermitian and skew parts commute and share S's
        // eigenvectors; a generic real combination separates them.
        let sh = s.adjoint();
        let herm = (s + &sh).map(|z| z * 0.5);
        let skew = (s - &sh).map(|z| z * C64::new(0.0, -0.5));
        let mix = herm + skew.map(|z| z * SKEW_MIX);
        let eig = SymmetricEigen::try_new(mix, f64::EPSILON, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
        let v = eig.eigenvectors;
        let sv = s * &v;
        let lambda = (0..n).map(|k| v.column(k).dotc(&sv.column(k))).collect();
        (v, lambda)
    };

    // deterministic ordering
    let scale = lambda.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tie = 1e-10 * scale.max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (lambda[a], lambda[b]);
        if (la.re - lb.re).abs() > tie {
            la.re.partial_cmp(&lb.re).unwrap()
        } else if (la.im - lb.im).abs() > tie {
            la.im.partial_cmp(&lb.im).unwrap()
        } else {
            a.cmp(&b)
        }
    });
    let lambda: Vec<C64> = order.iter().map(|&k| lambda[k]).collect();
    v = CMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    for k in 0..n {
        normalize_phase(&mut v, k);
    }

    let v_real = if shift.is_real_symmetric() { Some(v.map(|z| z.re)) } else { None };
    let lambda = CVector::from_vec(lambda);

    let unitarity = (v.adjoint() * &v - CMatrix::identity(n, n)).norm();
    if unitarity > 1e-10 * n as f64 {
        return Err(Error::NumericalFailure(format!("eigenvectors not unitary ({unitarity:.3e})")));
    }
    let recon = (&v * CMatrix::from_diagonal(&lambda) * v.adjoint() - s).norm();
    if recon > 1e-8 * s.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NumericalFailure(format!("reconstruction residual {recon:.3e}")));
    }

    let gap_tol = DISTINCT_EIG_REL_TOL * scale;
    let mut distinct_eigs = scale > 0.0 || n == 1;
    'outer: for a in 0..n {
        for b in a + 1..n {
            if (lambda[a] - lambda[b]).norm() <= gap_tol {
                distinct_eigs = false;
                break 'outer;
            }
        }
    }

    Ok(SpectralBasis {
        v,
        v_real,
        lambda,
        distinct_eigs,
        hermitian,
    })
}

fn normalize_phase(v: &mut CMatrix, k: usize) {
    let col = v.column(k);
    let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = col.iter().position(|z| z.norm() >= max * (1.0 - 1e-8)).unwrap();
    let z = col[pivot];
    let phase = z.conj() / z.norm();
    v.column_mut(k).iter_mut().for_each(|x| *x *= phase);
}

impl SpectralBasis {
    pub fn from_shift(shift: &GraphShift) -> Result<Self> {
        decompose(shift, DEFAULT_NORMALITY_TOL)
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// Unitary eigenvector matrix `V` (columns are graph frequencies).
    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    /// Real `V` for real-symmetric shifts.
    pub fn v_real(&self) -> Option<&DMatrix<f64>> {
        self.v_real.as_ref()
    }

    pub fn lambda(&self) -> &CVector {
        &self.lambda
    }

    /// Real eigenvalues, when the shift is Hermitian.
    pub fn lambda_real(&self) -> Option<Vec<f64>> {
        self.hermitian.then(|| self.lambda.iter().map(|z| z.re).collect())
    }

    pub fn distinct_eigs(&self) -> bool {
        self.distinct_eigs
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// True when `V` is real, i.e. the shift is real symmetric.
    pub fn is_real(&self) -> bool {
        self.v_real.is_some()
    }

    pub fn max_abs_eig(&self) -> f64 {
        self.lambda.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `x̃ = V^H x`.
    pub fn gft(&self, x: &CVector) -> Result<CVector> {
        check_dim(self.n(), x.len())?;
        Ok(self.v.ad_mul(x))
    }

    /// `x = V x̃`.
    pub fn igft(&self, xt: &CVector) -> Result<CVector> {
        check_dim(self.n(), xt.len())?;
        Ok(&self.v * xt)
    }

    /// `V diag(d) V^H`.
    pub fn synthesize(&self, d: &CVector) -> Result<CMatrix> {
        check_dim(self.n(), d.len())?;
        let mut vd = self.v.clone();
        for (k, mut col) in vd.column_iter_mut().enumerate() {
            col *= d[k];
        }
        Ok(vd * self.v.adjoint())
    }

    /// `V^H M V`.
    pub fn to_frequency(&self, m: &CMatrix) -> Result<CMatrix> {
        check_dim(self.n(), m.nrows())?;
        check_dim(self.n(), m.ncols())?;
        Ok(self.v.ad_mul(&(m * &self.v)))
    }

    /// `V^H V^*`, the pseudo-covariance factor for real signals; identity
    /// when `V` is real.
    pub fn conjugate_overlap(&self) -> CMatrix {
        self.v.ad_mul(&self.v.conjugate())
    }
}

/// Free-function form of [`SpectralBasis::gft`].
pub fn gft(basis: &SpectralBasis, x: &CVector) -> Result<CVector> {
    basis.gft(x)
}

/// Free-function form of [`SpectralBasis::igft`].
pub fn igft(basis: &SpectralBasis, xt: &CVector) -> Result<CVector> {
    basis.igft(xt)
}

/// `Ψ_L`, with entry `(k, l)` equal to `λ_k^l` for `l = 0..L`.
#[derive(Clone, Debug)]
pub struct VandermondeMatrix {
    pub psi: CMatrix,
    /// 2-norm condition number estimate from the singular values.
    pub cond: f64,
}

impl VandermondeMatrix {
    pub fn l(&self) -> usize {
        self.psi.ncols()
    }
}

pub fn vandermonde(basis: &SpectralBasis, l: usize) -> Result<VandermondeMatrix> {
    let n = basis.n();
    if l == 0 || l > n {
        return Err(Error::DimensionMismatch { expected: n, found: l });
    }
    let psi = power_columns(basis.lambda().as_slice(), l, 1.0);
    let cond = condition_number(&psi);
    Ok(VandermondeMatrix { psi, cond })
}

/// Columns `(λ/scale)^l`, `l = 0..cols`.
pub(crate) fn power_columns(lambda: &[C64], cols: usize, scale: f64) -> CMatrix {
    let mut psi = CMatrix::zeros(lambda.len(), cols);
    for (k, &lam) in lambda.iter().enumerate() {
        let z = lam / scale;
        let mut acc = C64::new(1.0, 0.0);
        for l in 0..cols {
            psi[(k, l)] = acc;
            acc *= z;
        }
    }
    psi
}

pub(crate) fn condition_number(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Polynomial graph filter `H = Σ_l h_l S^l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFilter {
    coeffs: Vec<C64>,
}

impl GraphFilter {
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("filter needs at least one tap".into()));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("filter taps must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn real_coeffs(&self) -> Option<Vec<f64>> {
        self.is_real().then(|| self.coeffs.iter().map(|z| z.re).collect())
    }

    /// Number of taps `L`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|z| z.im == 0.0)
    }

    pub(crate) fn check_fits(&self, n: usize) -> Result<()> {
        if self.len() > n {
            return Err(Error::DegreeOverflow { degree: self.degree(), max: n.saturating_sub(1) });
        }
        Ok(())
    }

    /// `Σ_l h_l z^l` by Horner's rule.
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &h| acc * z + h)
    }
}

/// `y = Σ_l h_l S^l x`, using `L − 1` shift applications.
pub fn apply_filter_vertex(shift: &GraphShift, filter: &GraphFilter, x: &CVector) -> Result<CVector> {
    check_dim(shift.n(), x.len())?;
    filter.check_fits(shift.n())?;
    let s = shift.entries();
    let mut shifted = x.clone();
    let mut y = x * filter.coeffs[0];
    for &h in &filter.coeffs[1..] {
        shifted = s * &shifted;
        y.axpy(h, &shifted, C64::new(1.0, 0.0));
    }
    Ok(y)
}

/// `y = H^H x = Σ_l h_l^* (S^H)^l x`.
pub fn apply_filter_adjoint(shift: &GraphShift, filter: &GraphFilter, x: &CVector) -> Result<CVector> {
    check_dim(shift.n(), x.len())?;
    filter.check_fits(shift.n())?;
    let sh = shift.entries().adjoint();
    let mut shifted = x.clone();
    let mut y = x * filter.coeffs[0].conj();
    for &h in &filter.coeffs[1..] {
        shifted = &sh * &shifted;
        y.axpy(h.conj(), &shifted, C64::new(1.0, 0.0));
    }
    Ok(y)
}

/// `h̃ = Ψ_L h`.
pub fn filter_freq_response(basis: &SpectralBasis, filter: &GraphFilter) -> Result<CVector> {
    filter.check_fits(basis.n())?;
    Ok(basis.lambda().map(|lam| filter.eval(lam)))
}

/// Explicit `H = Σ_l h_l S^l`.
pub fn filter_matrix(shift: &GraphShift, filter: &GraphFilter) -> Result<CMatrix> {
    filter.check_fits(shift.n())?;
    let n = shift.n();
    let s = shift.entries();
    let mut power = CMatrix::identity(n, n);
    let mut h = &power * filter.coeffs[0];
    for &c in &filter.coeffs[1..] {
        power = s * &power;
        h += &power * c;
    }
    Ok(h)
}

/// Returns the real part when the imaginary part is negligible relative to
/// the vector norm.
pub fn as_real(v: &CVector) -> Option<DVector<f64>> {
    let norm = v.norm();
    let imag = v.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    (imag <= 1e-10 * norm || norm == 0.0).then(|| v.map(|z| z.re))
}

pub(crate) fn to_complex(v: &DVector<f64>) -> CVector {
    v.map(|x| C64::new(x, 0.0))
}
