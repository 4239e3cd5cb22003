//! CPTP maps in Choi form.
//!
//! Index convention (input factor first):
//!
//! ```text
//! choi = Σ_{i,j} E_ij ⊗ Λ(E_ij),   E_ij = |i⟩⟨j|
//! choi[(i·d_out + a, j·d_out + b)] = Λ(E_ij)[a, b]
//! Λ(ρ) = Tr_in[(ρᵀ ⊗ I) · choi]
//! ```
//!
//! The superoperator acts on row-major vectorizations,
//! `vec(ρ)[i·d + j] = ρ[i, j]`, so composition is a matrix product.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operators::{
    c, hermitian_eigen, random_ginibre, CMatrix, DensityOperator, HermitianOperator,
};

/// Default tolerance for complete positivity and trace preservation.
pub const CPTP_TOL: f64 = 1e-9;

/// Outcome of a CPTP check on a Choi matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CptpReport {
    pub min_eigenvalue: f64,
    pub tp_residual: f64,
    pub pass: bool,
}

/// A completely positive trace-preserving map.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    dim_in: usize,
    dim_out: usize,
    choi: CMatrix,
    superop: CMatrix,
}

/// Partial trace over the output factor of a Choi matrix.
pub fn partial_trace_output(choi: &CMatrix, dim_in: usize, dim_out: usize) -> CMatrix {
    CMatrix::from_fn(dim_in, dim_in, |i, j| {
        (0..dim_out)
            .map(|a| choi[(i * dim_out + a, j * dim_out + a)])
            .sum()
    })
}

/// Checks positivity of the Choi matrix and `Tr_out choi = I`.
pub fn validate_cptp(
    choi: &CMatrix,
    dim_in: usize,
    dim_out: usize,
    tol: f64,
) -> Result<CptpReport> {
    let n = dim_in * dim_out;
    if choi.nrows() != n || choi.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: choi.nrows(),
        });
    }
    let min_eigenvalue = hermitian_eigen(&crate::operators::symmetrize(choi)).min();
    let pt = partial_trace_output(choi, dim_in, dim_out);
    let tp_residual = (&pt - CMatrix::identity(dim_in, dim_in))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(CptpReport {
        min_eigenvalue,
        tp_residual,
        pass: min_eigenvalue >= -tol && tp_residual <= tol,
    })
}

fn choi_to_superop(choi: &CMatrix, dim_in: usize, dim_out: usize) -> CMatrix {
    CMatrix::from_fn(dim_out * dim_out, dim_in * dim_in, |row, col| {
        let (a, b) = (row / dim_out, row % dim_out);
        let (i, j) = (col / dim_in, col % dim_in);
        choi[(i * dim_out + a, j * dim_out + b)]
    })
}

fn superop_to_choi(s: &CMatrix, dim_in: usize, dim_out: usize) -> CMatrix {
    let n = dim_in * dim_out;
    CMatrix::from_fn(n, n, |row, col| {
        let (i, a) = (row / dim_out, row % dim_out);
        let (j, b) = (col / dim_out, col % dim_out);
        s[(a * dim_out + b, i * dim_in + j)]
    })
}

impl Channel {
    /// Validates at [`CPTP_TOL`].
    pub fn from_choi(choi: CMatrix, dim_in: usize, dim_out: usize) -> Result<Self> {
        Self::from_choi_with_tol(choi, dim_in, dim_out, CPTP_TOL)
    }

    pub fn from_choi_with_tol(
        choi: CMatrix,
        dim_in: usize,
        dim_out: usize,
        tol: f64,
    ) -> Result<Self> {
        let report = validate_cptp(&choi, dim_in, dim_out, tol)?;
        if !report.pass {
            return Err(Error::NotCptp {
                min_eigenvalue: report.min_eigenvalue,
                tp_residual: report.tp_residual,
            });
        }
        Ok(Self::from_choi_unchecked(choi, dim_in, dim_out))
    }

    fn from_choi_unchecked(choi: CMatrix, dim_in: usize, dim_out: usize) -> Self {
        let choi = crate::operators::symmetrize(&choi);
        let superop = choi_to_superop(&choi, dim_in, dim_out);
        Self {
            dim_in,
            dim_out,
            choi,
            superop,
        }
    }

    pub fn from_superoperator(superop: CMatrix, dim_in: usize, dim_out: usize) -> Result<Self> {
        if superop.nrows() != dim_out * dim_out || superop.ncols() != dim_in * dim_in {
            return Err(Error::DimensionMismatch {
                expected: dim_out * dim_out,
                found: superop.nrows(),
            });
        }
        Self::from_choi(superop_to_choi(&superop, dim_in, dim_out), dim_in, dim_out)
    }

    /// Kraus operators are `d_out × d_in`; requires `Σ K†K = I` within 1e-9.
    pub fn from_kraus(kraus: &[CMatrix]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::ParameterOutOfRange("empty Kraus list".into()))?;
        let (dim_out, dim_in) = first.shape();
        if let Some(k) = kraus.iter().find(|k| k.shape() != (dim_out, dim_in)) {
            return Err(Error::DimensionMismatch {
                expected: dim_out,
                found: k.nrows(),
            });
        }
        let mut sum = CMatrix::zeros(dim_in, dim_in);
        for k in kraus {
            sum += k.adjoint() * k;
        }
        let resid = (&sum - CMatrix::identity(dim_in, dim_in))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if resid > CPTP_TOL {
            return Err(Error::NotTracePreserving(resid));
        }
        let n = dim_in * dim_out;
        let mut choi = CMatrix::zeros(n, n);
        for k in kraus {
            for i in 0..dim_in {
                for a in 0..dim_out {
                    let left = k[(a, i)];
                    for j in 0..dim_in {
                        for b in 0..dim_out {
                            choi[(i * dim_out + a, j * dim_out + b)] += left * k[(b, j)].conj();
                        }
                    }
                }
            }
        }
        Self::from_choi(choi, dim_in, dim_out)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    pub fn superoperator(&self) -> &CMatrix {
        &self.superop
    }

    pub fn is_square(&self) -> bool {
        self.dim_in == self.dim_out
    }

    pub fn report(&self, tol: f64) -> CptpReport {
        validate_cptp(&self.choi, self.dim_in, self.dim_out, tol)
            .expect("dimensions fixed at construction")
    }

    /// Minimal Kraus decomposition from the Choi spectrum.
    pub fn kraus(&self) -> Vec<CMatrix> {
        let spec = hermitian_eigen(&self.choi);
        let scale = spec.max().max(1.0);
        spec.values
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &lambda)| lambda > 1e-14 * scale)
            .map(|(k, &lambda)| {
                let w = lambda.sqrt();
                CMatrix::from_fn(self.dim_out, self.dim_in, |a, i| {
                    spec.vectors[(i * self.dim_out + a, k)] * w
                })
            })
            .collect()
    }

    /// Applies the map to any Hermitian input (linear extension).
    pub fn apply_hermitian(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        if x.dim() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: x.dim(),
            });
        }
        let (din, dout) = (self.dim_in, self.dim_out);
        let rho = x.matrix();
        let mut out = CMatrix::zeros(dout, dout);
        for i in 0..din {
            for j in 0..din {
                let r = rho[(i, j)];
                if r.re == 0.0 && r.im == 0.0 {
                    continue;
                }
                for a in 0..dout {
                    for b in 0..dout {
                        out[(a, b)] += r * self.choi[(i * dout + a, j * dout + b)];
                    }
                }
            }
        }
        Ok(HermitianOperator::from_matrix_unchecked(out))
    }

    /// `Λ(ρ)`; the output is renormalized when its trace is within 1e-9 of 1.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let out = self.apply_hermitian(rho.as_hermitian())?;
        let tr = out.trace();
        if (tr - 1.0).abs() > CPTP_TOL {
            return Err(Error::NumericalTp((tr - 1.0).abs()));
        }
        DensityOperator::new(out.scale(1.0 / tr))
    }

    /// Heisenberg-picture map `Λ†`, the Hilbert–Schmidt adjoint.
    pub fn apply_adjoint(&self, y: &HermitianOperator) -> Result<HermitianOperator> {
        if y.dim() != self.dim_out {
            return Err(Error::DimensionMismatch {
                expected: self.dim_out,
                found: y.dim(),
            });
        }
        let v = DVector::from_iterator(
            self.dim_out * self.dim_out,
            y.matrix().transpose().iter().copied(),
        );
        let w = self.superop.adjoint() * v;
        let m = CMatrix::from_row_slice(self.dim_in, self.dim_in, w.as_slice());
        Ok(HermitianOperator::from_matrix_unchecked(m))
    }

    /// Largest entrywise difference between Choi matrices.
    pub fn choi_distance(&self, other: &Channel) -> f64 {
        if self.choi.shape() != other.choi.shape() {
            return f64::INFINITY;
        }
        self.choi
            .iter()
            .zip(other.choi.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_choi_unchecked(identity_choi(d), d, d)
    }

    /// `ρ ↦ (1−p)ρ + p·tr(ρ)·I/d`.
    pub fn depolarizing(p: f64, d: usize) -> Result<Self> {
        check_unit("depolarizing p", p)?;
        let n = d * d;
        let choi = identity_choi(d).map(|z| z * (1.0 - p))
            + CMatrix::identity(n, n).map(|z| z * (p / d as f64));
        Self::from_choi(choi, d, d)
    }

    /// `ρ ↦ (1−λ)ρ + λ·diag(ρ)`.
    pub fn dephasing(lambda: f64, d: usize) -> Result<Self> {
        check_unit("dephasing lambda", lambda)?;
        let mut choi = identity_choi(d).map(|z| z * (1.0 - lambda));
        for i in 0..d {
            choi[(i * d + i, i * d + i)] += c(lambda, 0.0);
        }
        Self::from_choi(choi, d, d)
    }

    /// Qubit amplitude damping toward `|0⟩`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_unit("amplitude damping gamma", gamma)?;
        let k0 = CMatrix::from_row_slice(
            2,
            2,
            &[c(1., 0.), c(0., 0.), c(0., 0.), c((1.0 - gamma).sqrt(), 0.)],
        );
        let k1 = CMatrix::from_row_slice(
            2,
            2,
            &[c(0., 0.), c(gamma.sqrt(), 0.), c(0., 0.), c(0., 0.)],
        );
        Self::from_kraus(&[k0, k1])
    }

    /// `ρ ↦ UρU†`.
    pub fn unitary(u: &CMatrix) -> Result<Self> {
        if u.nrows() != u.ncols() {
            return Err(Error::NotSquare(u.nrows(), u.ncols()));
        }
        let d = u.nrows();
        let resid = (u.adjoint() * u - CMatrix::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if resid > CPTP_TOL {
            return Err(Error::ParameterOutOfRange(format!(
                "matrix is not unitary (residual {resid:.3e})"
            )));
        }
        Self::from_kraus(std::slice::from_ref(u))
    }

    /// Replacement channel `ρ ↦ tr(ρ)·σ`.
    pub fn constant(sigma: &DensityOperator, dim_in: usize) -> Self {
        let dout = sigma.dim();
        let n = dim_in * dout;
        let mut choi = CMatrix::zeros(n, n);
        for i in 0..dim_in {
            for a in 0..dout {
                for b in 0..dout {
                    choi[(i * dout + a, i * dout + b)] = sigma.matrix()[(a, b)];
                }
            }
        }
        Self::from_choi_unchecked(choi, dim_in, dout)
    }

    /// Measure in the computational basis, then prepare `|y⟩` with
    /// probability `M[y, x]`. `M` is column-stochastic, `n_out × n_in`.
    pub fn classical_embedding(m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        let (n_out, n_in) = m.shape();
        for x in 0..n_in {
            let col = m.column(x);
            if col.iter().any(|&v| v < 0.0) || (col.sum() - 1.0).abs() > 1e-12 {
                return Err(Error::ParameterOutOfRange(format!(
                    "column {x} is not a probability vector"
                )));
            }
        }
        let n = n_in * n_out;
        let mut choi = CMatrix::zeros(n, n);
        for x in 0..n_in {
            for y in 0..n_out {
                choi[(x * n_out + y, x * n_out + y)] = c(m[(y, x)], 0.0);
            }
        }
        Self::from_choi(choi, n_in, n_out)
    }

    /// Random channel from a Haar isometry into system ⊗ environment
    /// (environment dimension `d`), environment traced out.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let env = d;
        let g = random_ginibre(d * env, d, &mut rng);
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        // Fix column phases so the isometry is Haar distributed.
        for col in 0..d {
            let diag = r[(col, col)];
            let phase = if diag.norm() > 0.0 {
                diag / diag.norm()
            } else {
                c(1.0, 0.0)
            };
            for row in 0..d * env {
                q[(row, col)] *= phase;
            }
        }
        let kraus: Vec<CMatrix> = (0..env)
            .map(|k| CMatrix::from_fn(d, d, |a, i| q[(a * env + k, i)]))
            .collect();
        Self::from_kraus(&kraus).expect("isometry columns give a trace-preserving Kraus set")
    }
}

/// `Λ₂ ∘ Λ₁`.
pub fn compose(outer: &Channel, inner: &Channel) -> Result<Channel> {
    if inner.dim_out != outer.dim_in {
        return Err(Error::DimensionMismatch {
            expected: outer.dim_in,
            found: inner.dim_out,
        });
    }
    let s = &outer.superop * &inner.superop;
    Channel::from_superoperator(s, inner.dim_in, outer.dim_out)
}

/// Choi matrix of the transpose map, which is positive but not completely positive.
pub fn transpose_map_choi(d: usize) -> CMatrix {
    let n = d * d;
    let mut choi = CMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            choi[(i * d + j, j * d + i)] = c(1.0, 0.0);
        }
    }
    choi
}

fn identity_choi(d: usize) -> CMatrix {
    let n = d * d;
    let mut choi = CMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            choi[(i * d + i, j * d + j)] = c(1.0, 0.0);
        }
    }
    choi
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::ParameterOutOfRange(format!(
            "{name} = {v} not in [0, 1]"
        )));
    }
    Ok(())
}

/// Pauli X as a unitary matrix.
pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}
