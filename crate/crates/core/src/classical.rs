//! Finite sample spaces: probability vectors, column-stochastic matrices,
//! the linear-programming deficiency and classical chain diagnostics.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;

use crate::channels::Channel;
use crate::conic::{self, BlockMatrix, BlockSpec, LinearFunctional, SdpProblem, SolveOptions};
use crate::deficiency::{SolverReport, StateFamily};
use crate::error::{Error, Result};
use crate::operators::DensityOperator;

/// Entry and normalization tolerance for probability vectors and columns.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector {
    p: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::ParameterOutOfRange(
                "probability vector of length 0".into(),
            ));
        }
        if let Some(v) = p.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!(
                "probability entry {v} is negative or not finite"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidTrace(total));
        }
        Ok(Self { p })
    }

    pub fn point_mass(n: usize, x: usize) -> Result<Self> {
        if x >= n {
            return Err(Error::ParameterOutOfRange(format!(
                "point mass at {x} in dimension {n}"
            )));
        }
        let mut p = vec![0.0; n];
        p[x] = 1.0;
        Self::new(p)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n.max(1) as f64; n])
    }

    /// Uniform on the simplex (Dirichlet(1, …, 1)).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self {
            p: random_simplex_point(n, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn l1_distance(&self, other: &ProbabilityVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    /// The diagonal density operator `diag(p)`.
    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::diagonal(&self.p).expect("probability vectors are valid diagonal states")
    }
}

fn random_simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(Exp1) + f64::MIN_POSITIVE)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// `n_out × n_in`, nonnegative, every column a probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    m: DMatrix<f64>,
}

impl StochasticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::ParameterOutOfRange(
                "stochastic matrix with an empty side".into(),
            ));
        }
        for (x, col) in m.column_iter().enumerate() {
            if col.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::ParameterOutOfRange(format!(
                    "column {x} has a negative entry"
                )));
            }
            if (col.sum() - 1.0).abs() > PROB_TOL {
                return Err(Error::ParameterOutOfRange(format!(
                    "column {x} sums to {}",
                    col.sum()
                )));
            }
        }
        Ok(Self { m })
    }

    /// Row-major entries, `rows[y][x] = M_{y,x}`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_out = rows.len();
        let n_in = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_in) {
            return Err(Error::ParameterOutOfRange(
                "ragged stochastic matrix".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n_out, n_in, |y, x| rows[y][x]))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    /// Every column equal to `q`: forgets its input.
    pub fn rank_one(q: &ProbabilityVector, n_in: usize) -> Self {
        Self {
            m: DMatrix::from_fn(q.dim(), n_in, |y, _| q.p[y]),
        }
    }

    /// Independent uniformly random columns.
    pub fn random<R: Rng + ?Sized>(n_out: usize, n_in: usize, rng: &mut R) -> Self {
        let mut m = DMatrix::zeros(n_out, n_in);
        for x in 0..n_in {
            let col = random_simplex_point(n_out, rng);
            m.column_mut(x).copy_from_slice(&col);
        }
        Self { m }
    }

    pub fn n_in(&self) -> usize {
        self.m.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn apply(&self, p: &ProbabilityVector) -> Result<ProbabilityVector> {
        if p.dim() != self.n_in() {
            return Err(Error::DimensionMismatch {
                expected: self.n_in(),
                found: p.dim(),
            });
        }
        let out = &self.m * DVector::from_column_slice(&p.p);
        Ok(ProbabilityVector {
            p: out.iter().map(|v| v.max(0.0)).collect(),
        })
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &StochasticMatrix) -> Result<StochasticMatrix> {
        if first.n_out() != self.n_in() {
            return Err(Error::DimensionMismatch {
                expected: self.n_in(),
                found: first.n_out(),
            });
        }
        Ok(Self {
            m: &self.m * &first.m,
        })
    }

    /// The measure-and-prepare channel acting as `self` on diagonal states.
    pub fn to_channel(&self) -> Result<Channel> {
        Channel::classical_embedding(&self.m)
    }
}

/// A nonempty, uniquely labelled family of distributions on one sample space.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalFamily {
    dim: usize,
    entries: Vec<(String, ProbabilityVector)>,
}

impl ClassicalFamily {
    pub fn new(entries: Vec<(String, ProbabilityVector)>) -> Result<Self> {
        let dim = entries.first().ok_or(Error::EmptyFamily)?.1.dim();
        let mut seen = HashSet::new();
        for (label, p) in &entries {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { dim, entries })
    }

    /// Labels `0, 1, …` in order.
    pub fn from_vectors(vectors: Vec<ProbabilityVector>) -> Result<Self> {
        Self::new(
            vectors
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i.to_string(), p))
                .collect(),
        )
    }

    /// Convenience: labels `0, 1, …` and raw probability rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_vectors(
            rows.iter()
                .map(|r| ProbabilityVector::new(r.clone()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, ProbabilityVector)] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(l, _)| l.as_str())
    }

    pub fn get(&self, label: &str) -> Result<&ProbabilityVector> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// `M(E) = {M p_θ}` with labels preserved.
    pub fn map(&self, m: &StochasticMatrix) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|(l, p)| Ok((l.clone(), m.apply(p)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// The subfamily `E_{Θ₀}` on the given labels, in the order given.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let entries = labels
            .iter()
            .map(|l| Ok((l.as_ref().to_string(), self.get(l.as_ref())?.clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Pairs `(p_θ, q_θ)` in this family's label order; label sets must agree.
    pub fn matched<'a>(
        &'a self,
        other: &'a ClassicalFamily,
    ) -> Result<Vec<(&'a ProbabilityVector, &'a ProbabilityVector)>> {
        if self.len() != other.len() {
            return Err(Error::LabelMismatch);
        }
        self.entries
            .iter()
            .map(|(l, p)| {
                other
                    .get(l)
                    .map(|q| (p, q))
                    .map_err(|_| Error::LabelMismatch)
            })
            .collect()
    }

    /// The same family as diagonal density operators.
    pub fn to_quantum(&self) -> StateFamily {
        StateFamily::new(
            self.entries
                .iter()
                .map(|(l, p)| (l.clone(), p.to_density()))
                .collect(),
        )
        .expect("a valid classical family embeds as a valid state family")
    }

    /// `max_{θ,θ′} ‖p_θ − p_θ′‖₁`.
    pub fn sup_pairwise_l1(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, (_, a)) in self.entries.iter().enumerate() {
            for (_, b) in &self.entries[i + 1..] {
                worst = worst.max(a.l1_distance(b).expect("family members share a dimension"));
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct LpDeficiency {
    /// `δ(E, F) ∈ [0, 2]`.
    pub value: f64,
    /// The minimizing garbling, columns clipped and renormalized.
    pub matrix: StochasticMatrix,
    pub solver_report: SolverReport,
}

/// Builds the δ(E, F) linear program: minimize t over stochastic `M` and
/// splittings `M p_θ − q_θ = u_θ − v_θ` with `Σ(u_θ + v_θ) ≤ t`.
pub fn lp_problem(e: &ClassicalFamily, f: &ClassicalFamily) -> Result<SdpProblem> {
    let pairs = e.matched(f)?;
    let (n_in, n_out) = (e.dim(), f.dim());
    let k = pairs.len();
    // M is stored column-major: entry (y, x) at x·n_out + y.
    let mut blocks = vec![BlockSpec::Nonnegative(n_in * n_out)];
    for _ in 0..k {
        blocks.push(BlockSpec::Nonnegative(n_out));
        blocks.push(BlockSpec::Nonnegative(n_out));
    }
    let slack_block = blocks.len();
    blocks.push(BlockSpec::Nonnegative(k));
    let t_block = blocks.len();
    blocks.push(BlockSpec::Nonnegative(1));
    let mut p = SdpProblem::new(blocks);
    p.set_objective(LinearFunctional::new().with(t_block, BlockMatrix::Vector(vec![1.0])));

    for x in 0..n_in {
        let mut coeff = vec![0.0; n_in * n_out];
        coeff[x * n_out..(x + 1) * n_out].fill(1.0);
        p.add_constraint(
            LinearFunctional::new().with(0, BlockMatrix::Vector(coeff)),
            1.0,
        );
    }
    for (j, (pe, qf)) in pairs.iter().enumerate() {
        let (ub, vb) = (1 + 2 * j, 2 + 2 * j);
        for y in 0..n_out {
            let mut coeff = vec![0.0; n_in * n_out];
            for x in 0..n_in {
                coeff[x * n_out + y] = pe.p[x];
            }
            let mut unit = vec![0.0; n_out];
            unit[y] = 1.0;
            p.add_constraint(
                LinearFunctional::new()
                    .with(0, BlockMatrix::Vector(coeff))
                    .with(ub, BlockMatrix::Vector(unit.iter().map(|v| -v).collect()))
                    .with(vb, BlockMatrix::Vector(unit)),
                qf.p[y],
            );
        }
        let mut unit = vec![0.0; k];
        unit[j] = 1.0;
        p.add_constraint(
            LinearFunctional::new()
                .with(ub, BlockMatrix::Vector(vec![1.0; n_out]))
                .with(vb, BlockMatrix::Vector(vec![1.0; n_out]))
                .with(slack_block, BlockMatrix::Vector(unit))
                .with(t_block, BlockMatrix::Vector(vec![-1.0])),
            0.0,
        );
    }

    // Start from the uniform garbling.
    let mut x0 = vec![BlockMatrix::Vector(vec![1.0 / n_out as f64; n_in * n_out])];
    let mut widths = Vec::with_capacity(k);
    for (_, qf) in &pairs {
        let r: Vec<f64> = qf.p.iter().map(|q| 1.0 / n_out as f64 - q).collect();
        let u: Vec<f64> = r.iter().map(|v| v.max(0.0) + 0.01).collect();
        let v: Vec<f64> = u.iter().zip(&r).map(|(u, r)| u - r).collect();
        widths.push(u.iter().sum::<f64>() + v.iter().sum::<f64>());
        x0.push(BlockMatrix::Vector(u));
        x0.push(BlockMatrix::Vector(v));
    }
    let t0 = widths.iter().map(|w| w + 0.1).fold(2.1, f64::max);
    x0.push(BlockMatrix::Vector(widths.iter().map(|w| t0 - w).collect()));
    x0.push(BlockMatrix::Vector(vec![t0]));
    p.set_interior_point(x0);
    Ok(p)
}

/// `δ(E, F)` for classical families by linear programming.
pub fn lp_deficiency(
    e: &ClassicalFamily,
    f: &ClassicalFamily,
    opts: &SolveOptions,
) -> Result<LpDeficiency> {
    let p = lp_problem(e, f)?;
    let sol = conic::solve(&p, opts)?.require_usable()?;
    let (n_in, n_out) = (e.dim(), f.dim());
    let BlockMatrix::Vector(raw) = &sol.blocks[0] else {
        unreachable!("garbling block is a vector")
    };
    let mut m = DMatrix::from_fn(n_out, n_in, |y, x| raw[x * n_out + y].max(0.0));
    for mut col in m.column_iter_mut() {
        let total = col.sum();
        if total > 0.0 {
            col /= total;
        } else {
            col.fill(1.0 / n_out as f64);
        }
    }
    Ok(LpDeficiency {
        value: sol.primal_value.clamp(0.0, 2.0),
        matrix: StochasticMatrix { m },
        solver_report: SolverReport {
            status: sol.status,
            primal_value: sol.primal_value,
            dual_value: sol.dual_value,
            residuals: sol.residuals,
            iterations: sol.iterations,
        },
    })
}

/// `Δ(E, F) = max{δ(E, F), δ(F, E)}` by linear programming.
#[allow(non_snake_case)]
pub fn lp_deficiency_Delta(
    e: &ClassicalFamily,
    f: &ClassicalFamily,
    opts: &SolveOptions,
) -> Result<f64> {
    Ok(lp_deficiency(e, f, opts)?
        .value
        .max(lp_deficiency(f, e, opts)?.value))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalTraceRow {
    pub step: usize,
    pub sup_pairwise_l1: f64,
    /// `δ(E_i, E_∞)`
    pub delta_fw: Option<f64>,
    /// `δ(E_∞, E_i)`
    pub delta_bw: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ClassicalTrace {
    /// `E_0, E_1, …, E_N`.
    pub families: Vec<ClassicalFamily>,
    pub rows: Vec<ClassicalTraceRow>,
}

/// `E_i = M_i(E_{i−1})`, with deficiencies to `limit` per step when given.
pub fn evolve_classical(
    initial: &ClassicalFamily,
    matrices: &[StochasticMatrix],
    limit: Option<&ClassicalFamily>,
    opts: &SolveOptions,
) -> Result<ClassicalTrace> {
    let mut families = Vec::with_capacity(matrices.len() + 1);
    families.push(initial.clone());
    for m in matrices {
        if m.n_in() != m.n_out() {
            return Err(Error::DimensionMismatch {
                expected: m.n_in(),
                found: m.n_out(),
            });
        }
        let next = families.last().expect("nonempty").map(m)?;
        families.push(next);
    }
    let rows = families
        .iter()
        .enumerate()
        .map(|(step, fam)| {
            let (delta_fw, delta_bw) = match limit {
                Some(l) => (
                    Some(lp_deficiency(fam, l, opts)?.value),
                    Some(lp_deficiency(l, fam, opts)?.value),
                ),
                None => (None, None),
            };
            Ok(ClassicalTraceRow {
                step,
                sup_pairwise_l1: fam.sup_pairwise_l1(),
                delta_fw,
                delta_bw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassicalTrace { families, rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicityTests {
    /// First step where every pair is within `tol` in L¹.
    pub weak: Option<usize>,
    /// First step where the given pair is within `tol`.
    pub l1_weak_per_pair: BTreeMap<(String, String), Option<usize>>,
}

impl ErgodicityTests {
    /// With finitely many labels the uniform and per-pair notions coincide:
    /// the uniform step is the latest per-pair step.
    pub fn notions_agree(&self) -> bool {
        let per_pair = self
            .l1_weak_per_pair
            .values()
            .try_fold(0usize, |acc, v| v.map(|s| acc.max(s)));
        match (self.weak, per_pair) {
            // L¹ distances never grow under stochastic maps, so once a pair
            // is within tolerance it stays there.
            (Some(w), Some(p)) => w == p,
            (None, None) => true,
            _ => false,
        }
    }
}

pub fn ergodicity_tests(trace: &ClassicalTrace, tol: f64) -> ErgodicityTests {
    let weak = trace
        .rows
        .iter()
        .find(|r| r.sup_pairwise_l1 <= tol)
        .map(|r| r.step);
    let labels: Vec<&str> = trace.families[0].labels().collect();
    let mut l1_weak_per_pair = BTreeMap::new();
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            let first = trace.families.iter().position(|fam| {
                let (pa, pb) = (
                    fam.get(a).expect("labels are stable"),
                    fam.get(b).expect("labels are stable"),
                );
                pa.l1_distance(pb)
                    .expect("family members share a dimension")
                    <= tol
            });
            l1_weak_per_pair.insert((a.to_string(), b.to_string()), first);
        }
    }
    ErgodicityTests {
        weak,
        l1_weak_per_pair,
    }
}

/// Convergence of the projections `Π_{Θ₀}(E_i) → Π_{Θ₀}(E_∗)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetConvergence {
    /// Per subset: the step from which `Δ ≤ tol` holds for the rest of the
    /// trace, or `None` if it fails at the final step.
    pub per_subset: Vec<(Vec<String>, Option<usize>)>,
    pub converged: bool,
}

/// Every label subset of size `1..=max_size`, in lexicographic index order.
pub fn label_subsets(labels: &[String], max_size: usize) -> Vec<Vec<String>> {
    fn extend(
        labels: &[String],
        start: usize,
        size: usize,
        cur: &mut Vec<String>,
        out: &mut Vec<Vec<String>>,
    ) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..labels.len() {
            cur.push(labels[i].clone());
            extend(labels, i + 1, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for size in 1..=max_size.min(labels.len()) {
        extend(labels, 0, size, &mut Vec::new(), &mut out);
    }
    out
}

/// Checks convergence relative to the weak topology through all subfamilies
/// of at most `max_size` labels.
pub fn subset_convergence(
    trace: &ClassicalTrace,
    limit: &ClassicalFamily,
    max_size: usize,
    tol: f64,
    opts: &SolveOptions,
) -> Result<SubsetConvergence> {
    let labels: Vec<String> = trace.families[0].labels().map(str::to_string).collect();
    let mut per_subset = Vec::new();
    for subset in label_subsets(&labels, max_size) {
        let target = limit.restrict(&subset)?;
        let mut since = None;
        for (step, fam) in trace.families.iter().enumerate() {
            let d = lp_deficiency_Delta(&fam.restrict(&subset)?, &target, opts)?;
            if d <= tol {
                since.get_or_insert(step);
            } else {
                since = None;
            }
        }
        per_subset.push((subset, since));
    }
    let converged = per_subset.iter().all(|(_, s)| s.is_some());
    Ok(SubsetConvergence {
        per_subset,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deficiency::deficiency_delta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    fn dichotomy() -> (ClassicalFamily, ClassicalFamily) {
        (
            ClassicalFamily::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            ClassicalFamily::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap(),
        )
    }

    #[test]
    fn validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![1.1, -0.1]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
        assert!(StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.4, 0.5]]).is_err());
        let p = ProbabilityVector::new(vec![0.25, 0.75]).unwrap();
        assert!(matches!(
            ClassicalFamily::new(vec![("a".into(), p.clone()), ("a".into(), p.clone())]),
            Err(Error::DuplicateLabel(_))
        ));
        let q = ProbabilityVector::uniform(3).unwrap();
        assert!(ClassicalFamily::new(vec![("a".into(), p), ("b".into(), q)]).is_err());
    }

    #[test]
    fn lp_fixtures() {
        let (e, f) = dichotomy();
        assert!(lp_deficiency(&e, &f, &opts()).unwrap().value.abs() < 1e-6);
        assert!((lp_deficiency(&f, &e, &opts()).unwrap().value - 0.2).abs() < 1e-6);

        let half = ClassicalFamily::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(lp_deficiency(&e, &half, &opts()).unwrap().value.abs() < 1e-6);
        assert!((lp_deficiency(&half, &e, &opts()).unwrap().value - 1.0).abs() < 1e-6);

        let other = ClassicalFamily::new(vec![
            ("x".into(), ProbabilityVector::uniform(2).unwrap()),
            ("y".into(), ProbabilityVector::uniform(2).unwrap()),
        ])
        .unwrap();
        assert!(matches!(
            lp_deficiency(&e, &other, &opts()),
            Err(Error::LabelMismatch)
        ));
    }

    #[test]
    fn optimal_garbling_attains_the_value() {
        let (e, f) = dichotomy();
        let r = lp_deficiency(&f, &e, &opts()).unwrap();
        let mapped = f.map(&r.matrix).unwrap();
        let worst = mapped
            .matched(&e)
            .unwrap()
            .into_iter()
            .map(|(a, b)| a.l1_distance(b).unwrap())
            .fold(0.0, f64::max);
        assert!((worst - r.value).abs() < 1e-6);
    }

    #[test]
    fn garbled_family_has_zero_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (n, k) = (rng.random_range(2..=4), rng.random_range(2..=4));
            let e = ClassicalFamily::from_vectors(
                (0..k)
                    .map(|_| ProbabilityVector::random(n, &mut rng))
                    .collect(),
            )
            .unwrap();
            let m = StochasticMatrix::random(rng.random_range(2..=4), n, &mut rng);
            let f = e.map(&m).unwrap();
            assert!(lp_deficiency(&e, &f, &opts()).unwrap().value < 1e-6);
        }
    }

    #[test]
    fn agrees_with_the_quantum_program_on_diagonal_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..8 {
            let (n, m, k) = (
                rng.random_range(2..=3),
                rng.random_range(2..=3),
                rng.random_range(2..=3),
            );
            let e = ClassicalFamily::from_vectors(
                (0..k)
                    .map(|_| ProbabilityVector::random(n, &mut rng))
                    .collect(),
            )
            .unwrap();
            let f = ClassicalFamily::from_vectors(
                (0..k)
                    .map(|_| ProbabilityVector::random(m, &mut rng))
                    .collect(),
            )
            .unwrap();
            let lp = lp_deficiency(&e, &f, &opts()).unwrap().value;
            let sdp = deficiency_delta(&e.to_quantum(), &f.to_quantum(), &opts())
                .unwrap()
                .value;
            assert!((lp - sdp).abs() <= 1e-6, "lp {lp} sdp {sdp}");
        }
    }

    #[test]
    fn triangle_monotonicity_and_restriction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..6 {
            let n = 3;
            let fam = |rng: &mut ChaCha8Rng| {
                ClassicalFamily::from_vectors(
                    (0..3).map(|_| ProbabilityVector::random(n, rng)).collect(),
                )
                .unwrap()
            };
            let (a, b, c) = (fam(&mut rng), fam(&mut rng), fam(&mut rng));
            let ab = lp_deficiency(&a, &b, &opts()).unwrap().value;
            let bc = lp_deficiency(&b, &c, &opts()).unwrap().value;
            let ac = lp_deficiency(&a, &c, &opts()).unwrap().value;
            assert!(ac <= ab + bc + 1e-9);

            // Garbling the source loses information, garbling the target
            // makes it easier to reach.
            let m = StochasticMatrix::random(n, n, &mut rng);
            assert!(
                lp_deficiency(&a.map(&m).unwrap(), &b, &opts())
                    .unwrap()
                    .value
                    >= ab - 1e-9
            );
            assert!(
                lp_deficiency(&a, &b.map(&m).unwrap(), &opts())
                    .unwrap()
                    .value
                    <= ab + 1e-9
            );

            let sub = ["0", "2"];
            let restricted = lp_deficiency(
                &a.restrict(&sub).unwrap(),
                &b.restrict(&sub).unwrap(),
                &opts(),
            )
            .unwrap()
            .value;
            assert!(restricted <= ab + 1e-9);
        }
    }

    #[test]
    fn restriction_examples() {
        let (e, _) = dichotomy();
        assert_eq!(e.restrict(&["0", "1"]).unwrap(), e);
        assert_eq!(e.restrict(&["1"]).unwrap().len(), 1);
        assert!(matches!(e.restrict(&["7"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn evolution_examples() {
        let (e, _) = dichotomy();
        let ids = vec![StochasticMatrix::identity(2); 4];
        let t = evolve_classical(&e, &ids, None, &opts()).unwrap();
        assert!(t.families.iter().all(|f| *f == e));

        let q = ProbabilityVector::new(vec![0.3, 0.7]).unwrap();
        let t = evolve_classical(&e, &[StochasticMatrix::rank_one(&q, 2)], None, &opts()).unwrap();
        assert!(t.families[1]
            .entries()
            .iter()
            .all(|(_, p)| p.l1_distance(&q).unwrap() < 1e-15));
        assert_eq!(ergodicity_tests(&t, 1e-9).weak, Some(1));

        // Doubly stochastic, irreducible and aperiodic: converges to uniform.
        let m = StochasticMatrix::from_rows(&[
            vec![0.5, 0.3, 0.2],
            vec![0.2, 0.5, 0.3],
            vec![0.3, 0.2, 0.5],
        ])
        .unwrap();
        let e3 = ClassicalFamily::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let t = evolve_classical(&e3, &vec![m; 60], None, &opts()).unwrap();
        let uniform = ProbabilityVector::uniform(3).unwrap();
        assert!(t.families[60]
            .entries()
            .iter()
            .all(|(_, p)| p.l1_distance(&uniform).unwrap() < 1e-10));
    }

    #[test]
    fn ergodicity_examples() {
        let (e, _) = dichotomy();
        let perm = StochasticMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let t = evolve_classical(&e, &vec![perm; 10], None, &opts()).unwrap();
        let r = ergodicity_tests(&t, 1e-6);
        assert_eq!(r.weak, None);
        assert!(r.notions_agree());

        // Second eigenvalue 0.8: the pairwise distance is 2·0.8^i.
        let m = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let t = evolve_classical(&e, &vec![m; 80], None, &opts()).unwrap();
        for row in &t.rows {
            assert!((row.sup_pairwise_l1 - 2.0 * 0.8f64.powi(row.step as i32)).abs() < 1e-12);
        }
        let tol = 1e-6;
        let expected = (0..).find(|&i| 2.0 * 0.8f64.powi(i) <= tol).unwrap() as usize;
        let r = ergodicity_tests(&t, tol);
        assert_eq!(r.weak, Some(expected));
        assert!(r.notions_agree());
    }

    #[test]
    fn projections_converge_to_the_limit() {
        let m = StochasticMatrix::from_rows(&[
            vec![0.6, 0.3, 0.2],
            vec![0.2, 0.4, 0.3],
            vec![0.2, 0.3, 0.5],
        ])
        .unwrap();
        let e = ClassicalFamily::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let t = evolve_classical(&e, &vec![m; 40], None, &opts()).unwrap();
        let limit = t.families[40].clone();
        let labels: Vec<String> = e.labels().map(str::to_string).collect();
        assert_eq!(label_subsets(&labels, 3).len(), 7);
        let c = subset_convergence(&t, &limit, 3, 1e-6, &opts()).unwrap();
        assert!(c.converged);
        assert!(c.per_subset.iter().all(|(_, s)| s.unwrap() < 40));
    }
}
