//! Dense Hermitian operators on `C^d`.
//!
//! Every spectral quantity here (norms, powers, square roots) goes through one
//! Hermitian eigendecomposition. Eigenvalues in `[-EIG_CLIP, 0)` are treated as
//! rounding noise and clipped to zero wherever a PSD input is required.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Eigenvalues above `-EIG_CLIP` count as nonnegative.
pub const EIG_CLIP: f64 = 1e-10;
/// Trace tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-10;
/// Dual-basis construction refuses Gram matrices worse than this.
pub const MAX_BASIS_CONDITION: f64 = 1e8;

const HERMITIAN_REJECT: f64 = 1e-8;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    /// Rebuild `Σ g(λ_k) v_k v_k†`.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = g(lambda);
            for r in 0..n {
                scaled[(r, k)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub(crate) fn hermitian_eigen(m: &CMatrix) -> Spectrum {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    Spectrum { values, vectors }
}

pub(crate) fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// A Hermitian `d×d` complex matrix.
#[derive(Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianOperator{}", self.mat)
    }
}

impl HermitianOperator {
    /// Accepts a square matrix that is Hermitian up to rounding and
    /// symmetrizes it exactly.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare(mat.nrows(), mat.ncols()));
        }
        if mat.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let scale = mat.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let asym = max_asymmetry(&mat);
        if asym > HERMITIAN_REJECT * scale {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::from_matrix_unchecked(mat))
    }

    /// Symmetrizes without rejecting; for matrices Hermitian by construction.
    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        Self {
            mat: symmetrize(&mat),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            mat: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mat: CMatrix::identity(d, d),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            mat: CMatrix::from_fn(
                n,
                n,
                |i, j| if i == j { c(diag[i], 0.0) } else { c(0.0, 0.0) },
            ),
        }
    }

    /// `|ψ⟩⟨ψ|` without normalization.
    pub fn outer(psi: &DVector<C64>) -> Self {
        Self::from_matrix_unchecked(psi * psi.adjoint())
    }

    /// Build from row-major real and imaginary parts.
    pub fn from_re_im(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<Self> {
        let n = re.len();
        if let Some(row) = re.iter().find(|r| r.len() != n) {
            return Err(Error::NotSquare(n, row.len()));
        }
        if let Some(im) = im {
            if im.len() != n || im.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: im.len(),
                });
            }
        }
        let mat = CMatrix::from_fn(n, n, |i, j| c(re[i][j], im.map(|m| m[i][j]).unwrap_or(0.0)));
        Self::new(mat)
    }

    pub fn to_re_im(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        split_re_im(&self.mat)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    /// Hilbert–Schmidt inner product `tr(AB)`, real for Hermitian arguments.
    pub fn hs_inner(&self, other: &HermitianOperator) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: self.mat.map(|z| z * s),
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        hermitian_eigen(&self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().min()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, other: &HermitianOperator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn try_sub(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_dim(other)?;
        Ok(Self {
            mat: &self.mat - &other.mat,
        })
    }

    pub fn try_add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.check_dim(other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        self.try_add(rhs)
            .expect("dimension mismatch in operator addition")
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        self.try_sub(rhs)
            .expect("dimension mismatch in operator subtraction")
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

pub(crate) fn split_re_im(m: &CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let re = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect())
        .collect();
    let im = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect())
        .collect();
    (re, im)
}

/// A density operator: PSD with unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(HermitianOperator);

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let min = op.min_eigenvalue();
        if min < -EIG_CLIP {
            return Err(Error::NotPsd(min));
        }
        Ok(Self(op))
    }

    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(mat)?)
    }

    /// Clip small negative eigenvalues and renormalize. Negativity below
    /// `-max_clip` is an error. Returns the state and the clipped magnitude.
    pub fn repair(op: &HermitianOperator, max_clip: f64) -> Result<(Self, f64)> {
        let spec = op.spectrum();
        if spec.min() < -max_clip {
            return Err(Error::NotPsd(spec.min()));
        }
        let clipped: f64 = spec.values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
        let fixed = HermitianOperator::from_matrix_unchecked(spec.map(|v| v.max(0.0)));
        let tr = fixed.trace();
        if tr <= 0.0 {
            return Err(Error::InvalidTrace(tr));
        }
        Ok((Self(fixed.scale(1.0 / tr)), clipped))
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm2 = psi.norm_squared();
        if norm2 <= 0.0 {
            return Err(Error::ParameterOutOfRange("zero state vector".into()));
        }
        Ok(Self(HermitianOperator::outer(psi).scale(1.0 / norm2)))
    }

    /// Computational basis projector `|i⟩⟨i|`.
    pub fn basis_state(d: usize, i: usize) -> Self {
        let mut diag = vec![0.0; d];
        diag[i] = 1.0;
        Self(HermitianOperator::from_real_diagonal(&diag))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(HermitianOperator::identity(d).scale(1.0 / d as f64))
    }

    pub fn diagonal(p: &[f64]) -> Result<Self> {
        if p.iter().any(|&x| x < -EIG_CLIP) {
            return Err(Error::NotPsd(
                p.iter().copied().fold(f64::INFINITY, f64::min),
            ));
        }
        Self::new(HermitianOperator::from_real_diagonal(p))
    }

    /// Qubit state `(I + r·σ)/2`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.5 * (1.0 + r[2]), 0.0),
                c(0.5 * r[0], -0.5 * r[1]),
                c(0.5 * r[0], 0.5 * r[1]),
                c(0.5 * (1.0 - r[2]), 0.0),
            ],
        );
        Self::from_matrix(m)
    }

    /// Bloch vector of a qubit state.
    pub fn bloch(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: self.dim(),
            });
        }
        let m = self.0.matrix();
        Ok([
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            m[(0, 0)].re - m[(1, 1)].re,
        ])
    }

    /// Ginibre-distributed mixed state `GG†/tr(GG†)`.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let g = random_ginibre(d, d, rng);
        let m = &g * g.adjoint();
        let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
        Self(HermitianOperator::from_matrix_unchecked(m.map(|z| z / tr)))
    }

    /// Haar-random pure state.
    pub fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let g = random_ginibre(d, 1, rng);
        let psi = DVector::from_iterator(d, g.iter().copied());
        Self::pure(&psi).expect("Gaussian vector is nonzero almost surely")
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn into_hermitian(self) -> HermitianOperator {
        self.0
    }
}

/// Haar-random unitary (QR of a Ginibre matrix with the phases of `R` fixed).
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let qr = random_ginibre(d, d, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 {
            z / z.norm()
        } else {
            c(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub(crate) fn random_ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

/// `‖A‖₁ = Σ|λ_k|`.
pub fn trace_norm(a: &HermitianOperator) -> f64 {
    a.eigenvalues().iter().map(|v| v.abs()).sum()
}

/// Largest absolute eigenvalue.
pub fn operator_norm(a: &HermitianOperator) -> f64 {
    let s = a.spectrum();
    s.min().abs().max(s.max().abs())
}

/// `A^α` for PSD `A` and `α ∈ (0, 1]`.
pub fn matrix_power(a: &HermitianOperator, alpha: f64) -> Result<HermitianOperator> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "exponent {alpha} not in (0, 1]"
        )));
    }
    psd_function(a, |v| v.powf(alpha))
}

/// Principal square root of a PSD operator.
pub fn psd_sqrt(a: &HermitianOperator) -> Result<HermitianOperator> {
    psd_function(a, f64::sqrt)
}

fn psd_function(a: &HermitianOperator, g: impl Fn(f64) -> f64) -> Result<HermitianOperator> {
    let spec = a.spectrum();
    if spec.min() < -EIG_CLIP {
        return Err(Error::NotPsd(spec.min()));
    }
    Ok(HermitianOperator::from_matrix_unchecked(spec.map(|v| {
        if v <= 0.0 {
            0.0
        } else {
            g(v)
        }
    })))
}

/// Expansion coefficients `α_ξ = tr(ρ ρ̃_ξ)` in an operator basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub coeffs: Vec<f64>,
}

impl Expansion {
    pub fn sup_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, a| m.max(a.abs()))
    }
}

/// A real basis of `Herm(d)` together with its biorthogonal dual.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<HermitianOperator>,
    duals: Vec<HermitianOperator>,
    condition: f64,
}

impl OperatorBasis {
    /// Computes the dual basis by inverting the Hilbert–Schmidt Gram matrix.
    pub fn from_elements(elements: Vec<HermitianOperator>) -> Result<Self> {
        let d = elements
            .first()
            .map(|e| e.dim())
            .ok_or(Error::EmptyFamily)?;
        if elements.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: elements.len(),
            });
        }
        if let Some(e) = elements.iter().find(|e| e.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: e.dim(),
            });
        }
        let n = elements.len();
        let gram = DMatrix::<f64>::from_fn(n, n, |i, j| elements[i].hs_inner(&elements[j]));
        let eig = SymmetricEigen::new(gram.clone());
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
                (lo.min(v.abs()), hi.max(v.abs()))
            });
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_BASIS_CONDITION) {
            return Err(Error::IllConditioned(condition));
        }
        let inv = gram
            .try_inverse()
            .ok_or(Error::IllConditioned(f64::INFINITY))?;
        let duals = (0..n)
            .map(|j| {
                let mut acc = CMatrix::zeros(d, d);
                for (k, e) in elements.iter().enumerate() {
                    acc += e.matrix().map(|z| z * inv[(k, j)]);
                }
                HermitianOperator::from_matrix_unchecked(acc)
            })
            .collect();
        Ok(Self {
            dim: d,
            elements,
            duals,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn duals(&self) -> &[HermitianOperator] {
        &self.duals
    }

    /// Condition number of the Gram matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Elements as density operators, when they are states.
    pub fn states(&self) -> Result<Vec<DensityOperator>> {
        self.elements
            .iter()
            .cloned()
            .map(DensityOperator::new)
            .collect()
    }
}

/// The `d²` pure states spanning `Herm(d)`: projectors `|i⟩⟨i|`, then for each
/// `i < j` the projectors onto `(|i⟩+|j⟩)/√2` and `(|i⟩+i|j⟩)/√2`.
pub fn state_basis(d: usize) -> Result<OperatorBasis> {
    if d < 2 {
        return Err(Error::ParameterOutOfRange(format!(
            "state basis needs d >= 2, got {d}"
        )));
    }
    let mut elements = Vec::with_capacity(d * d);
    for i in 0..d {
        elements.push(DensityOperator::basis_state(d, i).into_hermitian());
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let mut plus = DVector::from_element(d, c(0.0, 0.0));
            plus[i] = c(s, 0.0);
            plus[j] = c(s, 0.0);
            elements.push(HermitianOperator::outer(&plus));
            let mut plus_i = DVector::from_element(d, c(0.0, 0.0));
            plus_i[i] = c(s, 0.0);
            plus_i[j] = c(0.0, s);
            elements.push(HermitianOperator::outer(&plus_i));
        }
    }
    OperatorBasis::from_elements(elements)
}

pub fn expand(rho: &HermitianOperator, basis: &OperatorBasis) -> Result<Expansion> {
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: rho.dim(),
        });
    }
    Ok(Expansion {
        coeffs: basis.duals.iter().map(|dual| rho.hs_inner(dual)).collect(),
    })
}

/// `Σ_ξ α_ξ B_ξ`. Hermitian, not necessarily PSD.
pub fn reconstruct(coeffs: &[f64], basis: &OperatorBasis) -> Result<HermitianOperator> {
    reconstruct_with(coeffs, basis.elements())
}

/// Linear combination against arbitrary images of the basis elements.
pub fn reconstruct_with(coeffs: &[f64], images: &[HermitianOperator]) -> Result<HermitianOperator> {
    if coeffs.len() != images.len() {
        return Err(Error::DimensionMismatch {
            expected: images.len(),
            found: coeffs.len(),
        });
    }
    let d = images.first().map(|e| e.dim()).ok_or(Error::EmptyFamily)?;
    let mut acc = CMatrix::zeros(d, d);
    for (a, e) in coeffs.iter().zip(images) {
        acc += e.matrix().map(|z| z * *a);
    }
    Ok(HermitianOperator::from_matrix_unchecked(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli() -> [HermitianOperator; 4] {
        let i = HermitianOperator::identity(2);
        let x = HermitianOperator::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
        ))
        .unwrap();
        let y = HermitianOperator::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)],
        ))
        .unwrap();
        let z = HermitianOperator::from_real_diagonal(&[1.0, -1.0]);
        [i, x, y, z]
    }

    #[test]
    fn trace_norm_examples() {
        assert!(
            (trace_norm(&HermitianOperator::from_real_diagonal(&[1.0, -1.0])) - 2.0).abs() < 1e-14
        );
        assert_eq!(trace_norm(&HermitianOperator::zeros(3)), 0.0);
        let a = HermitianOperator::from_real_diagonal(&[0.75, 0.25]);
        let b = HermitianOperator::from_real_diagonal(&[0.5, 0.5]);
        assert!((trace_norm(&(&a - &b)) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn operator_norm_examples() {
        assert!(
            (operator_norm(&HermitianOperator::from_real_diagonal(&[1.0, -3.0])) - 3.0).abs()
                < 1e-14
        );
        assert!((operator_norm(&HermitianOperator::identity(4)) - 1.0).abs() < 1e-14);
        assert!((operator_norm(&pauli()[1].scale(0.5)) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn matrix_power_examples() {
        let a = HermitianOperator::from_real_diagonal(&[4.0, 9.0]);
        let r = matrix_power(&a, 0.5).unwrap();
        assert!(r.max_abs_diff(&HermitianOperator::from_real_diagonal(&[2.0, 3.0])) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = DensityOperator::random(3, &mut rng).into_hermitian();
        assert!(matrix_power(&rho, 1.0).unwrap().max_abs_diff(&rho) < 1e-12);
        let p = DensityOperator::random_pure(3, &mut rng).into_hermitian();
        for alpha in [0.1, 0.5, 0.9] {
            assert!(matrix_power(&p, alpha).unwrap().max_abs_diff(&p) < 1e-7);
        }
    }

    #[test]
    fn matrix_power_rejects_negative_spectrum() {
        let a = HermitianOperator::from_real_diagonal(&[1.0, -1e-3]);
        assert!(matches!(matrix_power(&a, 0.5), Err(Error::NotPsd(_))));
        let tiny = HermitianOperator::from_real_diagonal(&[1.0, -1e-12]);
        assert!(matrix_power(&tiny, 0.5).is_ok());
        assert!(matrix_power(&a, 1.5).is_err());
    }

    #[test]
    fn qubit_state_basis_bloch_vectors() {
        let basis = state_basis(2).unwrap();
        let expected = [
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
        ];
        for (state, want) in basis.states().unwrap().iter().zip(expected) {
            let r = state.bloch().unwrap();
            for k in 0..3 {
                assert!((r[k] - want[k]).abs() < 1e-14, "{r:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn basis_biorthogonality() {
        for d in 2..=4 {
            let basis = state_basis(d).unwrap();
            assert_eq!(basis.len(), d * d);
            for (i, e) in basis.elements().iter().enumerate() {
                for (j, dual) in basis.duals().iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((e.hs_inner(dual) - want).abs() < 1e-9);
                }
            }
        }
    }

    // Rank by plain Gaussian elimination over the real coordinates of each element.
    fn real_rank(ops: &[HermitianOperator]) -> usize {
        let mut rows: Vec<Vec<f64>> = ops
            .iter()
            .map(|o| o.matrix().iter().flat_map(|z| [z.re, z.im]).collect())
            .collect();
        let cols = rows[0].len();
        let mut rank = 0;
        for col in 0..cols {
            let Some(p) = (rank..rows.len())
                .max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()))
            else {
                break;
            };
            if rows[p][col].abs() < 1e-10 {
                continue;
            }
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank {
                    let f = row[col] / pivot[col];
                    for (x, p) in row.iter_mut().zip(&pivot) {
                        *x -= f * p;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn qutrit_basis_is_full_rank() {
        let basis = state_basis(3).unwrap();
        assert_eq!(basis.len(), 9);
        assert_eq!(real_rank(basis.elements()), 9);
        assert!(basis.condition() < MAX_BASIS_CONDITION);
    }

    #[test]
    fn expand_basis_element_is_unit_vector() {
        let basis = state_basis(3).unwrap();
        let e = expand(&basis.elements()[4], &basis).unwrap();
        for (k, a) in e.coeffs.iter().enumerate() {
            assert!((a - if k == 4 { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }

    #[test]
    fn pauli_basis_expansion_of_maximally_mixed() {
        let basis = OperatorBasis::from_elements(pauli().to_vec()).unwrap();
        for (dual, p) in basis.duals().iter().zip(pauli()) {
            assert!(dual.max_abs_diff(&p.scale(0.5)) < 1e-14);
        }
        let e = expand(DensityOperator::maximally_mixed(2).as_hermitian(), &basis).unwrap();
        let want = [0.5, 0.0, 0.0, 0.0];
        for (a, w) in e.coeffs.iter().zip(want) {
            assert!((a - w).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruct_examples() {
        let basis = state_basis(2).unwrap();
        let zero = reconstruct(&[0.0; 4], &basis).unwrap();
        assert_eq!(trace_norm(&zero), 0.0);
        let e2 = reconstruct(&[0.0, 0.0, 1.0, 0.0], &basis).unwrap();
        assert!(e2.max_abs_diff(&basis.elements()[2]) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = DensityOperator::random(2, &mut rng);
        let back =
            reconstruct(&expand(rho.as_hermitian(), &basis).unwrap().coeffs, &basis).unwrap();
        assert!(back.min_eigenvalue() > -1e-12);
        assert!((back.trace() - 1.0).abs() < 1e-12);
        assert!(reconstruct(&[1.0; 3], &basis).is_err());
    }

    #[test]
    fn rejects_non_hermitian_and_bad_states() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(
            HermitianOperator::new(m),
            Err(Error::NotHermitian(_))
        ));
        assert!(matches!(
            DensityOperator::new(HermitianOperator::from_real_diagonal(&[0.5, 0.4])),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityOperator::new(HermitianOperator::from_real_diagonal(&[1.5, -0.5])),
            Err(Error::NotPsd(_))
        ));
        assert!(state_basis(1).is_err());
    }
}
