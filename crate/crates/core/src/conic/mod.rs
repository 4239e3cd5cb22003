//! Small dense semidefinite programs in standard primal form:
//!
//! ```text
//! minimize    ⟨C, X⟩
//! subject to  ⟨A_i, X⟩ = b_i,   i = 1..m
//!             X = (X_1, …, X_B),  each X_k symmetric PSD, Hermitian PSD,
//!                                 a nonnegative vector, or free
//! ```
//!
//! Hermitian blocks are realified (`[[Re, −Im], [Im, Re]]`) before solving, with
//! coefficient matrices halved so that functional values are preserved.
//! Problems must carry a strictly feasible primal point; the dual side starts
//! infeasible and is driven to feasibility by the path-following iteration.

pub mod fixtures;
mod ipm;

use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::{c, hermitian_eigen, max_asymmetry, CMatrix};

pub type RMatrix = DMatrix<f64>;

/// Declared variable block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockSpec {
    /// Real symmetric PSD matrix of the given side.
    Symmetric(usize),
    /// Complex Hermitian PSD matrix of the given side.
    Hermitian(usize),
    /// Vector of nonnegative scalars.
    Nonnegative(usize),
    /// Vector of unconstrained scalars.
    Free(usize),
}

impl BlockSpec {
    fn accepts(&self, m: &BlockMatrix) -> bool {
        match (self, m) {
            (BlockSpec::Symmetric(n), BlockMatrix::Real(a)) => a.shape() == (*n, *n),
            (BlockSpec::Hermitian(n), BlockMatrix::Complex(a)) => a.shape() == (*n, *n),
            (BlockSpec::Hermitian(n), BlockMatrix::Real(a)) => a.shape() == (*n, *n),
            (BlockSpec::Nonnegative(n) | BlockSpec::Free(n), BlockMatrix::Vector(v)) => {
                v.len() == *n
            }
            _ => false,
        }
    }
}

/// Coefficient or value attached to one block.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockMatrix {
    Real(RMatrix),
    Complex(CMatrix),
    Vector(Vec<f64>),
}

impl BlockMatrix {
    /// Real inner product: `tr(AB)` for matrices, dot product for vectors.
    pub fn inner(&self, other: &BlockMatrix) -> f64 {
        match (self, other) {
            (BlockMatrix::Real(a), BlockMatrix::Real(b)) => a.dot(b),
            (BlockMatrix::Complex(a), BlockMatrix::Complex(b)) => {
                a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
            }
            (BlockMatrix::Real(a), BlockMatrix::Complex(b))
            | (BlockMatrix::Complex(b), BlockMatrix::Real(a)) => {
                a.iter().zip(b.iter()).map(|(x, y)| x * y.re).sum()
            }
            (BlockMatrix::Vector(a), BlockMatrix::Vector(b)) => {
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            }
            _ => panic!("inner product between incompatible block kinds"),
        }
    }

    fn as_complex(&self) -> Option<CMatrix> {
        match self {
            BlockMatrix::Complex(a) => Some(a.clone()),
            BlockMatrix::Real(a) => Some(a.map(|v| c(v, 0.0))),
            BlockMatrix::Vector(_) => None,
        }
    }

    /// Smallest eigenvalue (matrices) or entry (vectors).
    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            BlockMatrix::Real(a) => nalgebra::SymmetricEigen::new(a.clone()).eigenvalues.min(),
            BlockMatrix::Complex(a) => hermitian_eigen(a).min(),
            BlockMatrix::Vector(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            BlockMatrix::Real(a) => a.norm_squared(),
            BlockMatrix::Complex(a) => a.norm_squared(),
            BlockMatrix::Vector(v) => v.iter().map(|x| x * x).sum(),
        }
    }

    fn axpy(&mut self, alpha: f64, x: &BlockMatrix) {
        match (self, x) {
            (BlockMatrix::Real(a), BlockMatrix::Real(b)) => *a += b * alpha,
            (BlockMatrix::Complex(a), BlockMatrix::Complex(b)) => *a += b.map(|z| z * alpha),
            (BlockMatrix::Complex(a), BlockMatrix::Real(b)) => *a += b.map(|v| c(v * alpha, 0.0)),
            (BlockMatrix::Vector(a), BlockMatrix::Vector(b)) => {
                a.iter_mut().zip(b).for_each(|(u, v)| *u += alpha * v)
            }
            _ => panic!("axpy between incompatible block kinds"),
        }
    }

    fn zeros_like(spec: BlockSpec) -> BlockMatrix {
        match spec {
            BlockSpec::Symmetric(n) => BlockMatrix::Real(RMatrix::zeros(n, n)),
            BlockSpec::Hermitian(n) => BlockMatrix::Complex(CMatrix::zeros(n, n)),
            BlockSpec::Nonnegative(n) | BlockSpec::Free(n) => BlockMatrix::Vector(vec![0.0; n]),
        }
    }

    fn bits(&self, out: &mut Vec<u64>) {
        match self {
            BlockMatrix::Real(a) => out.extend(a.iter().map(|v| v.to_bits())),
            BlockMatrix::Complex(a) => {
                out.extend(a.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]))
            }
            BlockMatrix::Vector(v) => out.extend(v.iter().map(|x| x.to_bits())),
        }
    }
}

/// A sparse-over-blocks linear functional `X ↦ Σ_k ⟨A_k, X_k⟩`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearFunctional {
    pub terms: Vec<(usize, BlockMatrix)>,
}

impl LinearFunctional {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, block: usize, coeff: BlockMatrix) -> Self {
        self.terms.push((block, coeff));
        self
    }

    pub fn push(&mut self, block: usize, coeff: BlockMatrix) {
        self.terms.push((block, coeff));
    }

    pub fn eval(&self, values: &[BlockMatrix]) -> f64 {
        self.terms.iter().map(|(b, a)| a.inner(&values[*b])).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub functional: LinearFunctional,
    pub rhs: f64,
}

/// Standard-form SDP with an optional strictly feasible primal point.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    pub objective: LinearFunctional,
    pub constraints: Vec<Constraint>,
    pub interior: Option<Vec<BlockMatrix>>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        Self {
            blocks,
            objective: LinearFunctional::new(),
            constraints: Vec::new(),
            interior: None,
        }
    }

    pub fn set_objective(&mut self, f: LinearFunctional) {
        self.objective = f;
    }

    pub fn add_constraint(&mut self, functional: LinearFunctional, rhs: f64) {
        self.constraints.push(Constraint { functional, rhs });
    }

    pub fn set_interior_point(&mut self, values: Vec<BlockMatrix>) {
        self.interior = Some(values);
    }

    fn check_functional(&self, f: &LinearFunctional, what: &str) -> Result<()> {
        for (b, coeff) in &f.terms {
            let spec = self.blocks.get(*b).ok_or_else(|| {
                Error::InvalidProblem(format!("{what} addresses undeclared block {b}"))
            })?;
            if !spec.accepts(coeff) {
                return Err(Error::InvalidProblem(format!(
                    "{what}: coefficient does not match block {b} ({spec:?})"
                )));
            }
            if let BlockMatrix::Real(a) = coeff {
                if max_asymmetry(&a.map(|v| c(v, 0.0))) > 1e-12 * a.amax().max(1.0) {
                    return Err(Error::InvalidProblem(format!(
                        "{what}: block {b} coefficient is not symmetric"
                    )));
                }
            }
            if let BlockMatrix::Complex(a) = coeff {
                if max_asymmetry(a) > 1e-12 * a.iter().map(|z| z.norm()).fold(1.0, f64::max) {
                    return Err(Error::InvalidProblem(format!(
                        "{what}: block {b} coefficient is not Hermitian"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Structural checks plus strict feasibility of the supplied interior point.
    pub fn validate(&self) -> Result<()> {
        if self
            .blocks
            .iter()
            .any(|b| matches!(b, BlockSpec::Symmetric(0) | BlockSpec::Hermitian(0)))
        {
            return Err(Error::InvalidProblem("empty matrix block".into()));
        }
        self.check_functional(&self.objective, "objective")?;
        for (i, con) in self.constraints.iter().enumerate() {
            self.check_functional(&con.functional, &format!("constraint {i}"))?;
        }
        let x0 = self
            .interior
            .as_ref()
            .ok_or_else(|| Error::NoInteriorPoint("problem carries no interior point".into()))?;
        if x0.len() != self.blocks.len() {
            return Err(Error::NoInteriorPoint(
                "interior point has the wrong number of blocks".into(),
            ));
        }
        for (k, (spec, value)) in self.blocks.iter().zip(x0).enumerate() {
            if !spec.accepts(value) {
                return Err(Error::NoInteriorPoint(format!(
                    "block {k} value does not match {spec:?}"
                )));
            }
            if !matches!(spec, BlockSpec::Free(_)) {
                let min = value.min_eigenvalue();
                if !(min > 0.0) {
                    return Err(Error::NoInteriorPoint(format!(
                        "block {k} is not strictly inside its cone (min {min:.3e})"
                    )));
                }
            }
        }
        for (i, con) in self.constraints.iter().enumerate() {
            let r = con.functional.eval(x0) - con.rhs;
            if r.abs() > 1e-8 * (1.0 + con.rhs.abs()) {
                return Err(Error::NoInteriorPoint(format!(
                    "constraint {i} violated by {r:.3e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// The run stalled, but its best iterate is within a factor 100 of the
    /// requested tolerances; that iterate is returned.
    Inaccurate,
    MaxIterations,
    NumericalFailure,
}

/// Feasibility and gap measures, all relative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// `‖b − A(X)‖ / (1 + ‖b‖)`
    pub primal_infeasibility: f64,
    /// `‖C − A*(y) − Z‖ / (1 + ‖C‖)`
    pub dual_infeasibility: f64,
    /// `|p − d| / (1 + |p| + |d|)`
    pub relative_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Primal values per declared block.
    pub blocks: Vec<BlockMatrix>,
    /// Equality multipliers.
    pub y: Vec<f64>,
    /// Dual slack per declared block (zero for free blocks).
    pub dual_slack: Vec<BlockMatrix>,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Bit pattern of everything the solver returned.
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut out = vec![
            self.primal_value.to_bits(),
            self.dual_value.to_bits(),
            self.iterations as u64,
        ];
        for b in self.blocks.iter().chain(&self.dual_slack) {
            b.bits(&mut out);
        }
        out.extend(self.y.iter().map(|v| v.to_bits()));
        out
    }

    /// Converts a non-optimal status into an error.
    pub fn require_optimal(self) -> Result<Self> {
        self.require(|s| s == SolveStatus::Optimal)
    }

    /// Like [`Self::require_optimal`] but also accepts
    /// [`SolveStatus::Inaccurate`]; callers should surface a warning.
    pub fn require_usable(self) -> Result<Self> {
        self.require(|s| matches!(s, SolveStatus::Optimal | SolveStatus::Inaccurate))
    }

    fn require(self, ok: impl Fn(SolveStatus) -> bool) -> Result<Self> {
        if ok(self.status) {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                gap: self.residuals.relative_gap,
                pinf: self.residuals.primal_infeasibility,
                dinf: self.residuals.dual_infeasibility,
            })
        }
    }
}

/// One audited solve: the problem, and what came back.
#[derive(Clone, Debug)]
pub struct AuditRecord {
    pub problem: SdpProblem,
    pub options: SolveOptions,
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub fingerprint: Vec<u64>,
}

/// Collects every solve routed through options that carry it.
#[derive(Debug, Default)]
pub struct SolveAudit {
    records: Mutex<Vec<AuditRecord>>,
}

impl SolveAudit {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.records.lock().expect("audit lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("audit lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub audit: Option<Arc<SolveAudit>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            audit: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            gap_tol: tol,
            feas_tol: tol,
            ..Self::default()
        }
    }

    pub fn with_audit(mut self, audit: Arc<SolveAudit>) -> Self {
        self.audit = Some(audit);
        self
    }

    /// Same tolerances, no audit sink.
    pub fn detached(&self) -> Self {
        Self {
            audit: None,
            ..self.clone()
        }
    }
}

/// `[[Re A, −Im A], [Im A, Re A]]`.
pub fn realify(a: &CMatrix) -> RMatrix {
    let n = a.nrows();
    RMatrix::from_fn(2 * n, 2 * n, |r, col| {
        let z = a[(r % n, col % n)];
        match (r < n, col < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Projects a realified matrix back onto `C^{n×n}`; exact inverse of
/// [`realify`] on its range.
pub fn unrealify(r: &RMatrix) -> CMatrix {
    let n = r.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        c(
            0.5 * (r[(i, j)] + r[(i + n, j + n)]),
            0.5 * (r[(i + n, j)] - r[(i, j + n)]),
        )
    })
}

/// Solves `p`. Malformed problems and missing interior points are errors;
/// convergence failures are reported through [`SolveStatus`].
pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution> {
    p.validate()?;
    let sol = ipm::solve_validated(p, opts);
    if let Some(audit) = &opts.audit {
        audit
            .records
            .lock()
            .expect("audit lock poisoned")
            .push(AuditRecord {
                problem: p.clone(),
                options: opts.detached(),
                status: sol.status,
                primal_value: sol.primal_value,
                dual_value: sol.dual_value,
                fingerprint: sol.fingerprint(),
            });
    }
    Ok(sol)
}

/// Residuals recomputed from the user-level problem and solution alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport {
    pub residuals: Residuals,
    pub primal_value: f64,
    pub dual_value: f64,
    /// Smallest eigenvalue over all primal cone blocks.
    pub primal_cone_min: f64,
    /// Smallest eigenvalue over all dual slack cone blocks.
    pub dual_cone_min: f64,
    /// `Σ ⟨X_k, Z_k⟩`
    pub complementarity: f64,
}

pub fn check_kkt(p: &SdpProblem, sol: &SdpSolution) -> Result<KktReport> {
    if sol.blocks.len() != p.blocks.len() || sol.dual_slack.len() != p.blocks.len() {
        return Err(Error::InvalidProblem(
            "solution block count does not match problem".into(),
        ));
    }
    if sol.y.len() != p.constraints.len() {
        return Err(Error::InvalidProblem(
            "multiplier count does not match constraints".into(),
        ));
    }
    let b_norm = p
        .constraints
        .iter()
        .map(|con| con.rhs * con.rhs)
        .sum::<f64>()
        .sqrt();
    let rp = p
        .constraints
        .iter()
        .map(|con| (con.rhs - con.functional.eval(&sol.blocks)).powi(2))
        .sum::<f64>()
        .sqrt();

    // C − Σ y_i A_i − Z, block by block.
    let mut rd: Vec<BlockMatrix> = p
        .blocks
        .iter()
        .map(|s| BlockMatrix::zeros_like(*s))
        .collect();
    for (b, coeff) in &p.objective.terms {
        rd[*b].axpy(1.0, coeff);
    }
    let c_norm = rd.iter().map(|m| m.norm_sq()).sum::<f64>().sqrt();
    for (con, yi) in p.constraints.iter().zip(&sol.y) {
        for (b, coeff) in &con.functional.terms {
            rd[*b].axpy(-yi, coeff);
        }
    }
    for (k, z) in sol.dual_slack.iter().enumerate() {
        rd[k].axpy(-1.0, z);
    }
    let rd_norm = rd.iter().map(|m| m.norm_sq()).sum::<f64>().sqrt();

    let primal_value = p.objective.eval(&sol.blocks);
    let dual_value: f64 = p
        .constraints
        .iter()
        .zip(&sol.y)
        .map(|(con, y)| con.rhs * y)
        .sum();
    let mut primal_cone_min = f64::INFINITY;
    let mut dual_cone_min = f64::INFINITY;
    let mut complementarity = 0.0;
    for (k, spec) in p.blocks.iter().enumerate() {
        if matches!(spec, BlockSpec::Free(_)) {
            continue;
        }
        primal_cone_min = primal_cone_min.min(sol.blocks[k].min_eigenvalue());
        dual_cone_min = dual_cone_min.min(sol.dual_slack[k].min_eigenvalue());
        complementarity += sol.blocks[k].inner(&sol.dual_slack[k]);
    }
    Ok(KktReport {
        residuals: Residuals {
            primal_infeasibility: rp / (1.0 + b_norm),
            dual_infeasibility: rd_norm / (1.0 + c_norm),
            relative_gap: (primal_value - dual_value).abs()
                / (1.0 + primal_value.abs() + dual_value.abs()),
        },
        primal_value,
        dual_value,
        primal_cone_min,
        dual_cone_min,
        complementarity,
    })
}

fn write_matrix(out: &mut String, m: &RMatrix) {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|col| format!("{:.17e}", m[(r, col)]))
            .collect();
        let _ = writeln!(out, "    {}", row.join(" "));
    }
}

/// Plain-text dump of the realified problem, for cross-checking with an
/// external solver.
///
/// ```text
/// sdp-realified v1
/// blocks <B>
/// block <k> <sym|lp|free> <side>     (Hermitian blocks appear as sym of doubled side)
/// constraints <m>
/// objective
///   term <k>
///     <rows of the coefficient; vectors on a single row>
/// constraint <i> rhs <b_i>
///   term <k>
///     ...
/// ```
pub fn dump_realified(p: &SdpProblem) -> String {
    let mut out = String::from("sdp-realified v1\n");
    let _ = writeln!(out, "blocks {}", p.blocks.len());
    for (k, spec) in p.blocks.iter().enumerate() {
        let line = match spec {
            BlockSpec::Symmetric(n) => format!("sym {n}"),
            BlockSpec::Hermitian(n) => format!("sym {}", 2 * n),
            BlockSpec::Nonnegative(n) => format!("lp {n}"),
            BlockSpec::Free(n) => format!("free {n}"),
        };
        let _ = writeln!(out, "block {k} {line}");
    }
    let _ = writeln!(out, "constraints {}", p.constraints.len());
    let write_functional = |out: &mut String, f: &LinearFunctional| {
        for (b, coeff) in &f.terms {
            let _ = writeln!(out, "  term {b}");
            match (&p.blocks[*b], coeff) {
                (BlockSpec::Hermitian(_), m) => {
                    let cm = m.as_complex().expect("matrix coefficient");
                    write_matrix(out, &(realify(&cm) * 0.5));
                }
                (_, BlockMatrix::Real(m)) => write_matrix(out, m),
                (_, BlockMatrix::Vector(v)) => {
                    let row: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
                    let _ = writeln!(out, "    {}", row.join(" "));
                }
                (_, BlockMatrix::Complex(_)) => unreachable!("validated problem"),
            }
        }
    };
    out.push_str("objective\n");
    write_functional(&mut out, &p.objective);
    for (i, con) in p.constraints.iter().enumerate() {
        let _ = writeln!(out, "constraint {i} rhs {:.17e}", con.rhs);
        write_functional(&mut out, &con.functional);
    }
    out
}

/// Splits a Hermitian matrix into `P − Q` with `P, Q ≻ 0`, each shifted by `eps·I`.
pub fn strict_split(h: &CMatrix, eps: f64) -> (CMatrix, CMatrix) {
    let spec = hermitian_eigen(h);
    let n = h.nrows();
    let shift = CMatrix::identity(n, n).map(|z| z * eps);
    let pos = spec.map(|v| v.max(0.0)) + &shift;
    let neg = spec.map(|v| (-v).max(0.0)) + shift;
    (pos, neg)
}

/// Orthonormal basis of `Herm(n)` under `⟨A, B⟩ = tr(AB)`.
pub fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut m = CMatrix::zeros(n, n);
        m[(i, i)] = c(1.0, 0.0);
        out.push(m);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut re = CMatrix::zeros(n, n);
            re[(i, j)] = c(s, 0.0);
            re[(j, i)] = c(s, 0.0);
            out.push(re);
            let mut im = CMatrix::zeros(n, n);
            im[(i, j)] = c(0.0, -s);
            im[(j, i)] = c(0.0, s);
            out.push(im);
        }
    }
    out
}
