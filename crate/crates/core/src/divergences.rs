//! Monotone k-point information quantities and their continuity moduli.

use crate::conic::{
    self, hermitian_basis, strict_split, BlockMatrix, BlockSpec, LinearFunctional, SdpProblem,
    SolveOptions,
};
use crate::error::{Error, Result};
use crate::operators::{
    c, matrix_power, psd_sqrt, trace_norm, CMatrix, DensityOperator, HermitianOperator, Spectrum,
    EIG_CLIP,
};

/// Which functional `D` is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum DivergenceKind {
    /// `‖ρ₁ − ρ₂‖₁`
    TraceDistance,
    /// `1 − F(ρ₁, ρ₂)`
    OneMinusFidelity,
    /// `4/(1−α²)·(1 − tr ρ₁^{(1−α)/2} ρ₂^{(1+α)/2})`
    Alpha(f64),
    /// `Σ_ij a_ij D(ρ_i, ρ_j)` over a two-point base.
    WeightedSum {
        weights: Vec<Vec<f64>>,
        base: Box<DivergenceKind>,
    },
    /// `inf_σ max_j D(ρ_j, σ)` over a two-point base.
    Chebyshev { base: Box<DivergenceKind> },
}

/// A divergence together with the number of states it consumes.
/// `arity = None` means any positive number (Chebyshev).
#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceSpec {
    pub kind: DivergenceKind,
    pub arity: Option<usize>,
}

impl DivergenceSpec {
    pub fn new(kind: DivergenceKind) -> Result<Self> {
        let arity = validate_kind(&kind)?;
        Ok(Self { kind, arity })
    }

    pub fn trace_distance() -> Self {
        Self {
            kind: DivergenceKind::TraceDistance,
            arity: Some(2),
        }
    }

    pub fn one_minus_fidelity() -> Self {
        Self {
            kind: DivergenceKind::OneMinusFidelity,
            arity: Some(2),
        }
    }

    pub fn alpha(alpha: f64) -> Result<Self> {
        Self::new(DivergenceKind::Alpha(alpha))
    }

    pub fn check_arity(&self, k: usize) -> Result<()> {
        match self.arity {
            Some(a) if a != k => Err(Error::DimensionMismatch {
                expected: a,
                found: k,
            }),
            None if k == 0 => Err(Error::EmptyFamily),
            _ => Ok(()),
        }
    }

    /// Short column label, e.g. `alpha(0.5)`.
    pub fn label(&self) -> String {
        kind_label(&self.kind)
    }
}

fn kind_label(kind: &DivergenceKind) -> String {
    match kind {
        DivergenceKind::TraceDistance => "trace_distance".into(),
        DivergenceKind::OneMinusFidelity => "one_minus_fidelity".into(),
        DivergenceKind::Alpha(a) => format!("alpha({a})"),
        DivergenceKind::WeightedSum { base, .. } => format!("weighted_sum({})", kind_label(base)),
        DivergenceKind::Chebyshev { base } => format!("chebyshev({})", kind_label(base)),
    }
}

fn is_two_point(kind: &DivergenceKind) -> bool {
    matches!(
        kind,
        DivergenceKind::TraceDistance | DivergenceKind::OneMinusFidelity | DivergenceKind::Alpha(_)
    )
}

fn validate_kind(kind: &DivergenceKind) -> Result<Option<usize>> {
    match kind {
        DivergenceKind::TraceDistance | DivergenceKind::OneMinusFidelity => Ok(Some(2)),
        DivergenceKind::Alpha(a) => {
            check_alpha(*a)?;
            Ok(Some(2))
        }
        DivergenceKind::WeightedSum { weights, base } => {
            if !is_two_point(base) {
                return Err(Error::UnsupportedSpec(
                    "weighted sums need a two-point base".into(),
                ));
            }
            validate_kind(base)?;
            let k = weights.len();
            if k == 0 || weights.iter().any(|row| row.len() != k) {
                return Err(Error::ParameterOutOfRange(
                    "weights must be a nonempty square matrix".into(),
                ));
            }
            if let Some(&w) = weights.iter().flatten().find(|w| !(**w >= 0.0)) {
                return Err(Error::NegativeWeight(w));
            }
            Ok(Some(k))
        }
        DivergenceKind::Chebyshev { base } => {
            if !is_two_point(base) {
                return Err(Error::UnsupportedSpec(
                    "Chebyshev divergence needs a two-point base".into(),
                ));
            }
            validate_kind(base)?;
            Ok(None)
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > -1.0 && alpha < 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "alpha = {alpha} not in (-1, 1)"
        )));
    }
    Ok(())
}

fn check_pair(a: &DensityOperator, b: &DensityOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    check_pair(a, b)?;
    Ok(trace_norm(&(a.as_hermitian() - b.as_hermitian())))
}

/// Spectral weight below which a state counts as pure when computing fidelity.
const PURE_TOL: f64 = 1e-14;

/// `F(ρ₁, ρ₂) = tr √(√ρ₁ ρ₂ √ρ₁)`.
///
/// Evaluated as the nuclear norm of `√ρ₁ √ρ₂`, which avoids square roots of
/// rounding noise. If either state is pure, `F = √⟨ψ|ρ|ψ⟩` is used directly,
/// which keeps the equality cases of the Fuchs–van de Graaf bounds exact.
pub fn fidelity(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    check_pair(a, b)?;
    let sa = a.as_hermitian().spectrum();
    let sb = b.as_hermitian().spectrum();
    for spec in [&sa, &sb] {
        if spec.min() < -EIG_CLIP {
            return Err(Error::NotPsd(spec.min()));
        }
    }
    for (spec, other) in [(&sa, b), (&sb, a)] {
        if let Some(psi) = pure_vector(spec) {
            let overlap = (psi.adjoint() * other.matrix() * &psi)[(0, 0)].re;
            return Ok(overlap.clamp(0.0, 1.0).sqrt());
        }
    }
    let ra = sa.map(|v| v.max(0.0).sqrt());
    let rb = sb.map(|v| v.max(0.0).sqrt());
    let f: f64 = (ra * rb).singular_values().iter().sum();
    Ok(f.min(1.0))
}

fn pure_vector(spec: &Spectrum) -> Option<CMatrix> {
    let top = spec
        .values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))?
        .0;
    let rest: f64 = spec
        .values
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != top)
        .map(|(_, v)| v.abs())
        .sum();
    (rest <= PURE_TOL).then(|| spec.vectors.columns(top, 1).into_owned())
}

pub fn one_minus_fidelity(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    Ok(1.0 - fidelity(a, b)?)
}

/// Exponents are applied exactly as written: `(1−α)/2` on the first state.
pub fn alpha_divergence(alpha: f64, a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair(a, b)?;
    let pa = matrix_power(a.as_hermitian(), (1.0 - alpha) / 2.0)?;
    let pb = matrix_power(b.as_hermitian(), (1.0 + alpha) / 2.0)?;
    let overlap = pa.hs_inner(&pb);
    Ok(4.0 / (1.0 - alpha * alpha) * (1.0 - overlap))
}

fn two_point(kind: &DivergenceKind, a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    match kind {
        DivergenceKind::TraceDistance => trace_distance(a, b),
        DivergenceKind::OneMinusFidelity => one_minus_fidelity(a, b),
        DivergenceKind::Alpha(alpha) => alpha_divergence(*alpha, a, b),
        other => Err(Error::UnsupportedSpec(format!(
            "{} is not a two-point divergence",
            kind_label(other)
        ))),
    }
}

pub fn weighted_sum(
    weights: &[Vec<f64>],
    base: &DivergenceKind,
    states: &[&DensityOperator],
) -> Result<f64> {
    let k = states.len();
    if weights.len() != k || weights.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: k,
        });
    }
    if let Some(&w) = weights.iter().flatten().find(|w| !(**w >= 0.0)) {
        return Err(Error::NegativeWeight(w));
    }
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if weights[i][j] != 0.0 {
                total += weights[i][j] * two_point(base, states[i], states[j])?;
            }
        }
    }
    Ok(total)
}

/// Value and minimizing center of `inf_σ max_j D(ρ_j, σ)`.
#[derive(Clone, Debug)]
pub struct ChebyshevCenter {
    pub value: f64,
    pub center: DensityOperator,
    /// `true` when certified by the conic solver, `false` for the local-search estimate.
    pub exact: bool,
}

/// Exact for a trace-distance base (certified SDP); other bases fall back to
/// a multistart local search and are flagged `exact = false`.
pub fn chebyshev_divergence(
    base: &DivergenceKind,
    states: &[&DensityOperator],
    opts: &SolveOptions,
) -> Result<ChebyshevCenter> {
    let first = states.first().ok_or(Error::EmptyFamily)?;
    for s in states {
        check_pair(first, s)?;
    }
    match base {
        DivergenceKind::TraceDistance => chebyshev_trace_distance(states, opts),
        kind if is_two_point(kind) => Ok(chebyshev_local_search(kind, states)),
        other => Err(Error::UnsupportedSpec(format!(
            "Chebyshev over {}",
            kind_label(other)
        ))),
    }
}

fn chebyshev_trace_distance(
    states: &[&DensityOperator],
    opts: &SolveOptions,
) -> Result<ChebyshevCenter> {
    let d = states[0].dim();
    let k = states.len();
    // Blocks: 0 = center σ, then (P_j, Q_j) pairs, then slacks s_j, then t.
    let mut blocks = vec![BlockSpec::Hermitian(d)];
    for _ in 0..k {
        blocks.push(BlockSpec::Hermitian(d));
        blocks.push(BlockSpec::Hermitian(d));
    }
    let slack_block = blocks.len();
    blocks.push(BlockSpec::Nonnegative(k));
    let t_block = blocks.len();
    // t ≥ tr(P+Q) ≥ 0, so a sign constraint costs nothing and avoids a free column.
    blocks.push(BlockSpec::Nonnegative(1));
    let mut p = SdpProblem::new(blocks);
    p.set_objective(LinearFunctional::new().with(t_block, BlockMatrix::Vector(vec![1.0])));

    let eye = CMatrix::identity(d, d);
    p.add_constraint(
        LinearFunctional::new().with(0, BlockMatrix::Complex(eye.clone())),
        1.0,
    );
    let basis = hermitian_basis(d);
    for (j, rho) in states.iter().enumerate() {
        let (pb, qb) = (1 + 2 * j, 2 + 2 * j);
        // σ + P_j − Q_j = ρ_j
        for bmat in &basis {
            let rhs = (bmat * rho.matrix()).trace().re;
            p.add_constraint(
                LinearFunctional::new()
                    .with(0, BlockMatrix::Complex(bmat.clone()))
                    .with(pb, BlockMatrix::Complex(bmat.clone()))
                    .with(qb, BlockMatrix::Complex(-bmat.clone())),
                rhs,
            );
        }
        // tr P_j + tr Q_j + s_j − t = 0
        let mut unit = vec![0.0; k];
        unit[j] = 1.0;
        p.add_constraint(
            LinearFunctional::new()
                .with(pb, BlockMatrix::Complex(eye.clone()))
                .with(qb, BlockMatrix::Complex(eye.clone()))
                .with(slack_block, BlockMatrix::Vector(unit))
                .with(t_block, BlockMatrix::Vector(vec![-1.0])),
            0.0,
        );
    }

    let sigma0 = eye.map(|z| z / d as f64);
    let splits: Vec<(CMatrix, CMatrix)> = states
        .iter()
        .map(|rho| strict_split(&(rho.matrix() - &sigma0), 0.01))
        .collect();
    let widths: Vec<f64> = splits
        .iter()
        .map(|(a, b)| a.trace().re + b.trace().re)
        .collect();
    let t0 = widths.iter().copied().fold(0.0, f64::max) + 0.1;
    let mut x0 = vec![BlockMatrix::Complex(sigma0)];
    for (a, b) in splits {
        x0.push(BlockMatrix::Complex(a));
        x0.push(BlockMatrix::Complex(b));
    }
    x0.push(BlockMatrix::Vector(widths.iter().map(|w| t0 - w).collect()));
    x0.push(BlockMatrix::Vector(vec![t0]));
    p.set_interior_point(x0);

    // An `Inaccurate` solve is still certified, to within 100× tolerance.
    let sol = conic::solve(&p, opts)?.require_usable()?;
    let BlockMatrix::Complex(center) = &sol.blocks[0] else {
        unreachable!("Hermitian block yields a complex value")
    };
    let center = HermitianOperator::from_matrix_unchecked(center.clone());
    let (center, _) = DensityOperator::repair(&center, 1e-6)?;
    Ok(ChebyshevCenter {
        value: sol.primal_value.max(0.0),
        center,
        exact: true,
    })
}

fn state_from_params(x: &[f64], d: usize) -> DensityOperator {
    let a = CMatrix::from_fn(d, d, |i, j| c(x[2 * (i * d + j)], x[2 * (i * d + j) + 1]));
    let m = &a * a.adjoint();
    let tr = m.trace().re.max(f64::MIN_POSITIVE);
    DensityOperator::new(HermitianOperator::from_matrix_unchecked(m.map(|z| z / tr)))
        .unwrap_or_else(|_| DensityOperator::maximally_mixed(d))
}

fn params_from_state(rho: &DensityOperator) -> Vec<f64> {
    let root = psd_sqrt(rho.as_hermitian()).expect("density operators are PSD");
    root.matrix().iter().enumerate().fold(
        vec![0.0; 2 * rho.dim() * rho.dim()],
        |mut acc, (idx, z)| {
            // column-major iteration; map back to row-major parameter slots
            let d = rho.dim();
            let (i, j) = (idx % d, idx / d);
            acc[2 * (i * d + j)] = z.re;
            acc[2 * (i * d + j) + 1] = z.im;
            acc
        },
    )
}

fn chebyshev_local_search(kind: &DivergenceKind, states: &[&DensityOperator]) -> ChebyshevCenter {
    let d = states[0].dim();
    let objective = |x: &[f64]| -> f64 {
        let sigma = state_from_params(x, d);
        states
            .iter()
            .map(|rho| two_point(kind, rho, &sigma).unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut starts: Vec<Vec<f64>> = vec![params_from_state(&DensityOperator::maximally_mixed(d))];
    for rho in states {
        let mixed = DensityOperator::new(
            &rho.as_hermitian().scale(0.5)
                + &DensityOperator::maximally_mixed(d)
                    .as_hermitian()
                    .scale(0.5),
        )
        .expect("convex combination of states");
        starts.push(params_from_state(&mixed));
    }
    let mut best = (f64::INFINITY, starts[0].clone());
    for start in starts {
        let (value, x) = nelder_mead(&objective, &start, 0.1, 4000, 1e-12);
        if value < best.0 {
            best = (value, x);
        }
    }
    ChebyshevCenter {
        value: best.0,
        center: state_from_params(&best.1, d),
        exact: false,
    }
}

fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> (f64, Vec<f64>) {
    let n = x0.len();
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((f(x0), x0.to_vec()));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push((f(&x), x));
    }
    let mut evals = n + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        if (simplex[n].0 - simplex[0].0).abs() <= ftol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(_, x)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n].1[k] - centroid[k]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].0 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < simplex[n - 1].0 {
            simplex[n] = (fr, xr);
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            evals += 1;
            if fc < simplex[n].0 {
                simplex[n] = (fc, xc);
            } else {
                let best = simplex[0].1.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = entry
                        .1
                        .iter()
                        .zip(&best)
                        .map(|(v, b)| b + 0.5 * (v - b))
                        .collect();
                    *entry = (f(&x), x);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
    simplex.swap_remove(0)
}

/// Evaluates any supported spec on a tuple of states. Chebyshev values come
/// from the certified SDP for trace-distance bases only.
pub fn evaluate(
    spec: &DivergenceSpec,
    states: &[&DensityOperator],
    opts: &SolveOptions,
) -> Result<f64> {
    spec.check_arity(states.len())?;
    match &spec.kind {
        DivergenceKind::WeightedSum { weights, base } => weighted_sum(weights, base, states),
        DivergenceKind::Chebyshev { base } => Ok(chebyshev_divergence(base, states, opts)?.value),
        kind => two_point(kind, states[0], states[1]),
    }
}

/// One instance of `|D(X…) − D(Y…)| ≤ f(‖X₁−Y₁‖₁, …)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulusCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Continuity modulus of a two-point base, in the distances of each slot.
fn base_modulus(kind: &DivergenceKind, x1: f64, x2: f64, dim: usize) -> Result<f64> {
    match kind {
        DivergenceKind::TraceDistance => Ok(x1 + x2),
        DivergenceKind::OneMinusFidelity => Ok(0.5 * x1 + x1.sqrt() + 0.5 * x2 + x2.sqrt()),
        DivergenceKind::Alpha(alpha) => {
            let cst = 4.0 * dim as f64 / (1.0 - alpha * alpha);
            Ok(cst * (x1.powf((1.0 - alpha) / 2.0) + x2.powf((1.0 + alpha) / 2.0)))
        }
        other => Err(Error::UnsupportedSpec(format!(
            "no modulus for {}",
            kind_label(other)
        ))),
    }
}

/// Evaluates both sides of the continuity bound for `spec`.
pub fn modulus_bound(
    spec: &DivergenceSpec,
    states: &[&DensityOperator],
    perturbed: &[&DensityOperator],
    opts: &SolveOptions,
) -> Result<ModulusCheck> {
    if states.len() != perturbed.len() {
        return Err(Error::DimensionMismatch {
            expected: states.len(),
            found: perturbed.len(),
        });
    }
    spec.check_arity(states.len())?;
    let dim = states[0].dim();
    let dists: Vec<f64> = states
        .iter()
        .zip(perturbed)
        .map(|(a, b)| trace_distance(a, b))
        .collect::<Result<_>>()?;
    let rhs = match &spec.kind {
        DivergenceKind::WeightedSum { weights, base } => {
            let mut total = 0.0;
            for (i, row) in weights.iter().enumerate() {
                for (j, w) in row.iter().enumerate() {
                    if *w != 0.0 {
                        total += w * base_modulus(base, dists[i], dists[j], dim)?;
                    }
                }
            }
            total
        }
        DivergenceKind::Chebyshev { base } => {
            if !matches!(**base, DivergenceKind::TraceDistance) {
                return Err(Error::UnsupportedSpec(
                    "Chebyshev modulus needs the exact trace-distance center".into(),
                ));
            }
            dists
                .iter()
                .map(|x| base_modulus(base, *x, 0.0, dim))
                .sum::<Result<f64>>()?
        }
        kind => base_modulus(kind, dists[0], dists[1], dim)?,
    };
    let lhs = (evaluate(spec, states, opts)? - evaluate(spec, perturbed, opts)?).abs();
    Ok(ModulusCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Channel;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(p: &[f64]) -> DensityOperator {
        DensityOperator::diagonal(p).unwrap()
    }

    fn plus() -> DensityOperator {
        DensityOperator::from_bloch([1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn trace_distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = DensityOperator::random(3, &mut rng);
        assert!(trace_distance(&rho, &rho).unwrap() < 1e-14);
        let (z0, z1) = (
            DensityOperator::basis_state(2, 0),
            DensityOperator::basis_state(2, 1),
        );
        assert!((trace_distance(&z0, &z1).unwrap() - 2.0).abs() < 1e-14);
        assert!(
            (trace_distance(&diag(&[0.75, 0.25]), &diag(&[0.5, 0.5])).unwrap() - 0.5).abs() < 1e-14
        );
        assert!(trace_distance(&z0, &DensityOperator::basis_state(3, 0)).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = DensityOperator::random(3, &mut rng);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);
        let z0 = DensityOperator::basis_state(2, 0);
        assert!((fidelity(&z0, &plus()).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
        // Bhattacharyya coefficient on commuting inputs.
        let want = 0.125f64.sqrt() + 0.375f64.sqrt();
        assert!((fidelity(&diag(&[0.5, 0.5]), &diag(&[0.25, 0.75])).unwrap() - want).abs() < 1e-12);
        assert!((want - 0.96593).abs() < 1e-5);
    }

    #[test]
    fn fidelity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = DensityOperator::random(3, &mut rng);
            let b = DensityOperator::random(3, &mut rng);
            assert!((fidelity(&a, &b).unwrap() - fidelity(&b, &a).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn one_minus_fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = DensityOperator::random(2, &mut rng);
        assert!(one_minus_fidelity(&rho, &rho).unwrap().abs() < 1e-9);
        let (z0, z1) = (
            DensityOperator::basis_state(2, 0),
            DensityOperator::basis_state(2, 1),
        );
        assert!((one_minus_fidelity(&z0, &z1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = DensityOperator::random(3, &mut rng);
        for a in [-0.5, 0.0, 0.5] {
            assert!(alpha_divergence(a, &rho, &rho).unwrap().abs() < 1e-9);
        }
        let (z0, z1) = (
            DensityOperator::basis_state(2, 0),
            DensityOperator::basis_state(2, 1),
        );
        assert!((alpha_divergence(0.0, &z0, &z1).unwrap() - 4.0).abs() < 1e-12);
        let (p, q): ([f64; 2], [f64; 2]) = ([0.5, 0.5], [0.25, 0.75]);
        let scalar: f64 = (0..2).map(|i| p[i].powf(0.25) * q[i].powf(0.75)).sum();
        let want = 4.0 / 0.75 * (1.0 - scalar);
        assert!((alpha_divergence(0.5, &diag(&p), &diag(&q)).unwrap() - want).abs() < 1e-12);
        assert!(matches!(
            alpha_divergence(1.0, &z0, &z1),
            Err(Error::ParameterOutOfRange(_))
        ));
    }

    #[test]
    fn weighted_sum_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let states: Vec<DensityOperator> = (0..3)
            .map(|_| DensityOperator::random(2, &mut rng))
            .collect();
        let refs: Vec<&DensityOperator> = states.iter().collect();
        let zero = vec![vec![0.0; 3]; 3];
        assert_eq!(
            weighted_sum(&zero, &DivergenceKind::TraceDistance, &refs).unwrap(),
            0.0
        );
        let w = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
        let v = weighted_sum(&w, &DivergenceKind::OneMinusFidelity, &refs[..2]).unwrap();
        assert!((v - one_minus_fidelity(refs[0], refs[1]).unwrap()).abs() < 1e-15);
        let neg = vec![vec![0.0, -1.0], vec![0.0, 0.0]];
        assert!(matches!(
            weighted_sum(&neg, &DivergenceKind::TraceDistance, &refs[..2]),
            Err(Error::NegativeWeight(_))
        ));
    }

    #[test]
    fn weighted_sum_on_diagonal_states_matches_scalar_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let probs: Vec<Vec<f64>> = (0..3)
                .map(|_| {
                    let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.01).collect();
                    let s: f64 = raw.iter().sum();
                    raw.iter().map(|x| x / s).collect()
                })
                .collect();
            let w: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
                .collect();
            let states: Vec<DensityOperator> = probs.iter().map(|p| diag(p)).collect();
            let refs: Vec<&DensityOperator> = states.iter().collect();
            let mut want = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    want += w[i][j]
                        * probs[i]
                            .iter()
                            .zip(&probs[j])
                            .map(|(a, b)| (a - b).abs())
                            .sum::<f64>();
                }
            }
            let got = weighted_sum(&w, &DivergenceKind::TraceDistance, &refs).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_examples() {
        let opts = SolveOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = DensityOperator::random(2, &mut rng);
        let single = chebyshev_divergence(&DivergenceKind::TraceDistance, &[&rho], &opts).unwrap();
        assert!(single.value < 1e-7);
        assert!(
            single
                .center
                .as_hermitian()
                .max_abs_diff(rho.as_hermitian())
                < 1e-6
        );
        let same = chebyshev_divergence(&DivergenceKind::TraceDistance, &[&rho, &rho, &rho], &opts)
            .unwrap();
        assert!(same.value < 1e-7);
        let (z0, z1) = (
            DensityOperator::basis_state(2, 0),
            DensityOperator::basis_state(2, 1),
        );
        let poles =
            chebyshev_divergence(&DivergenceKind::TraceDistance, &[&z0, &z1], &opts).unwrap();
        assert!((poles.value - 1.0).abs() < 1e-7);
        assert!(poles.exact);
        assert!(
            poles
                .center
                .as_hermitian()
                .max_abs_diff(DensityOperator::maximally_mixed(2).as_hermitian())
                < 1e-6
        );
    }

    #[test]
    fn chebyshev_bounded_by_first_member_center() {
        let opts = SolveOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let states: Vec<DensityOperator> = (0..3)
                .map(|_| DensityOperator::random(3, &mut rng))
                .collect();
            let refs: Vec<&DensityOperator> = states.iter().collect();
            let v = chebyshev_divergence(&DivergenceKind::TraceDistance, &refs, &opts)
                .unwrap()
                .value;
            let bound = refs
                .iter()
                .map(|r| trace_distance(r, refs[0]).unwrap())
                .fold(0.0, f64::max);
            assert!(v <= bound + 1e-7);
        }
    }

    #[test]
    fn approximate_chebyshev_is_flagged() {
        let (z0, z1) = (
            DensityOperator::basis_state(2, 0),
            DensityOperator::basis_state(2, 1),
        );
        let r = chebyshev_divergence(
            &DivergenceKind::OneMinusFidelity,
            &[&z0, &z1],
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(!r.exact);
        // Center I/2 gives 1 − 1/√2; the search should get close.
        assert!((r.value - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-3);
    }

    fn perturb(rho: &DensityOperator, eps: f64, rng: &mut ChaCha8Rng) -> DensityOperator {
        let other = DensityOperator::random(rho.dim(), rng);
        DensityOperator::new(
            &rho.as_hermitian().scale(1.0 - eps) + &other.as_hermitian().scale(eps),
        )
        .unwrap()
    }

    #[test]
    fn modulus_of_identical_tuples_is_zero() {
        let opts = SolveOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (a, b) = (
            DensityOperator::random(2, &mut rng),
            DensityOperator::random(2, &mut rng),
        );
        for spec in [
            DivergenceSpec::trace_distance(),
            DivergenceSpec::one_minus_fidelity(),
            DivergenceSpec::alpha(0.5).unwrap(),
        ] {
            let m = modulus_bound(&spec, &[&a, &b], &[&a, &b], &opts).unwrap();
            assert_eq!(m.rhs, 0.0);
            assert!(m.lhs < 1e-15 && m.holds);
        }
    }

    #[test]
    fn fidelity_modulus_holds_on_random_tuples() {
        let opts = SolveOptions::default();
        let spec = DivergenceSpec::one_minus_fidelity();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..1000 {
            let a = DensityOperator::random(2, &mut rng);
            let b = DensityOperator::random_pure(2, &mut rng);
            let eps = 10f64.powi(-(k % 6));
            let (a2, b2) = (perturb(&a, eps, &mut rng), perturb(&b, eps, &mut rng));
            let m = modulus_bound(&spec, &[&a, &b], &[&a2, &b2], &opts).unwrap();
            assert!(m.holds, "{m:?}");
        }
    }

    #[test]
    fn alpha_modulus_holds_on_random_tuples() {
        let opts = SolveOptions::default();
        let spec = DivergenceSpec::alpha(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for k in 0..1000 {
            let a = DensityOperator::random(2, &mut rng);
            let b = DensityOperator::random(2, &mut rng);
            let eps = 10f64.powi(-(k % 6));
            let (a2, b2) = (perturb(&a, eps, &mut rng), perturb(&b, eps, &mut rng));
            let m = modulus_bound(&spec, &[&a, &b], &[&a2, &b2], &opts).unwrap();
            assert!(m.holds, "{m:?}");
        }
    }

    #[test]
    fn alpha_modulus_near_pure_state() {
        // ρ₁ = |0⟩⟨0| against a slightly mixed copy: the first slot's
        // exponent (1−α)/2 dominates the change.
        let opts = SolveOptions::default();
        let spec = DivergenceSpec::alpha(0.5).unwrap();
        let (a, b) = (diag(&[1.0, 0.0]), diag(&[0.0, 1.0]));
        let a2 = diag(&[1.0 - 1e-6, 1e-6]);
        let m = modulus_bound(&spec, &[&a, &b], &[&a2, &b], &opts).unwrap();
        assert!(m.lhs > 0.1);
        assert!(m.holds, "{m:?}");
    }

    #[test]
    fn weighted_and_chebyshev_moduli() {
        let opts = SolveOptions::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let weighted = DivergenceSpec::new(DivergenceKind::WeightedSum {
            weights: vec![
                vec![0.0, 1.0, 0.5],
                vec![0.2, 0.0, 0.0],
                vec![0.0, 2.0, 0.0],
            ],
            base: Box::new(DivergenceKind::OneMinusFidelity),
        })
        .unwrap();
        let cheb = DivergenceSpec::new(DivergenceKind::Chebyshev {
            base: Box::new(DivergenceKind::TraceDistance),
        })
        .unwrap();
        for _ in 0..20 {
            let states: Vec<DensityOperator> = (0..3)
                .map(|_| DensityOperator::random(2, &mut rng))
                .collect();
            let moved: Vec<DensityOperator> =
                states.iter().map(|s| perturb(s, 0.05, &mut rng)).collect();
            let (r1, r2): (Vec<&DensityOperator>, Vec<&DensityOperator>) =
                (states.iter().collect(), moved.iter().collect());
            assert!(modulus_bound(&weighted, &r1, &r2, &opts).unwrap().holds);
            assert!(modulus_bound(&cheb, &r1, &r2, &opts).unwrap().holds);
        }
        let approx = DivergenceSpec::new(DivergenceKind::Chebyshev {
            base: Box::new(DivergenceKind::OneMinusFidelity),
        })
        .unwrap();
        let s = DensityOperator::random(2, &mut rng);
        assert!(matches!(
            modulus_bound(&approx, &[&s], &[&s], &opts),
            Err(Error::UnsupportedSpec(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(DivergenceSpec::alpha(1.0).is_err());
        assert!(DivergenceSpec::alpha(-1.0).is_err());
        assert!(matches!(
            DivergenceSpec::new(DivergenceKind::WeightedSum {
                weights: vec![vec![0.0, -0.1], vec![0.0, 0.0]],
                base: Box::new(DivergenceKind::TraceDistance)
            }),
            Err(Error::NegativeWeight(_))
        ));
        assert!(DivergenceSpec::new(DivergenceKind::Chebyshev {
            base: Box::new(DivergenceKind::Chebyshev {
                base: Box::new(DivergenceKind::TraceDistance)
            })
        })
        .is_err());
        assert_eq!(DivergenceSpec::alpha(0.5).unwrap().label(), "alpha(0.5)");
    }

    fn random_pair(d: usize, rng: &mut ChaCha8Rng) -> (DensityOperator, DensityOperator) {
        if rng.random::<bool>() {
            (
                DensityOperator::random(d, rng),
                DensityOperator::random(d, rng),
            )
        } else {
            (
                DensityOperator::random_pure(d, rng),
                DensityOperator::random(d, rng),
            )
        }
    }

    #[test]
    fn two_point_divergences_are_cptp_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let specs = [
            DivergenceSpec::trace_distance(),
            DivergenceSpec::one_minus_fidelity(),
            DivergenceSpec::alpha(-0.5).unwrap(),
            DivergenceSpec::alpha(0.001).unwrap(),
            DivergenceSpec::alpha(0.5).unwrap(),
        ];
        let opts = SolveOptions::default();
        for k in 0..300u64 {
            let d = 2 + (k as usize % 2);
            let ch = Channel::random(d, 5000 + k);
            let (a, b) = random_pair(d, &mut rng);
            let (ca, cb) = (ch.apply(&a).unwrap(), ch.apply(&b).unwrap());
            for spec in &specs {
                let before = evaluate(spec, &[&a, &b], &opts).unwrap();
                let after = evaluate(spec, &[&ca, &cb], &opts).unwrap();
                assert!(
                    after <= before + 1e-9,
                    "{} {after} > {before}",
                    spec.label()
                );
            }
        }
    }

    #[test]
    fn weighted_and_chebyshev_are_cptp_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let opts = SolveOptions::default();
        let weighted = DivergenceSpec::new(DivergenceKind::WeightedSum {
            weights: vec![
                vec![0.0, 1.0, 0.3],
                vec![0.5, 0.0, 0.0],
                vec![0.0, 0.7, 0.0],
            ],
            base: Box::new(DivergenceKind::Alpha(0.5)),
        })
        .unwrap();
        let cheb = DivergenceSpec::new(DivergenceKind::Chebyshev {
            base: Box::new(DivergenceKind::TraceDistance),
        })
        .unwrap();
        for k in 0..300u64 {
            let ch = Channel::random(2, 9000 + k);
            let states: Vec<DensityOperator> = (0..3)
                .map(|_| DensityOperator::random(2, &mut rng))
                .collect();
            let mapped: Vec<DensityOperator> =
                states.iter().map(|s| ch.apply(s).unwrap()).collect();
            let (r1, r2): (Vec<&DensityOperator>, Vec<&DensityOperator>) =
                (states.iter().collect(), mapped.iter().collect());
            assert!(
                evaluate(&weighted, &r2, &opts).unwrap()
                    <= evaluate(&weighted, &r1, &opts).unwrap() + 1e-9
            );
            if k % 3 == 0 {
                // Solver values are certified to ~1e-8 relative.
                assert!(
                    evaluate(&cheb, &r2, &opts).unwrap()
                        <= evaluate(&cheb, &r1, &opts).unwrap() + 1e-7
                );
            }
        }
    }

    #[test]
    fn fuchs_van_de_graaf_and_angle_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..1000 {
            let (a, b) = random_pair(2, &mut rng);
            let f = fidelity(&a, &b).unwrap();
            let half_td = 0.5 * trace_distance(&a, &b).unwrap();
            assert!(1.0 - f <= half_td + 1e-9);
            assert!(half_td <= (1.0 - f * f).max(0.0).sqrt() + 1e-9);
            let c3 = DensityOperator::random(2, &mut rng);
            let lhs = f.clamp(-1.0, 1.0).acos();
            let rhs = fidelity(&c3, &b).unwrap().acos() + fidelity(&a, &c3).unwrap().acos();
            assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn upper_sandwich_needs_squared_fidelity() {
        // |0⟩ against |+⟩: ½‖·‖₁ = 1/√2 while √(1−F) ≈ 0.541 < 1/√2 ≤ √(1−F²).
        let z0 = DensityOperator::basis_state(2, 0);
        let f = fidelity(&z0, &plus()).unwrap();
        let half_td = 0.5 * trace_distance(&z0, &plus()).unwrap();
        assert!(half_td > (1.0 - f).sqrt() + 0.1);
        assert!((half_td - (1.0 - f * f).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn pure_state_fidelity_is_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let g = crate::operators::random_ginibre(3, 2, &mut rng);
            let (u, v) = (
                DVector::from_iterator(3, g.column(0).iter().copied()),
                DVector::from_iterator(3, g.column(1).iter().copied()),
            );
            let want = u.dotc(&v).norm() / (u.norm() * v.norm());
            let got = fidelity(
                &DensityOperator::pure(&u).unwrap(),
                &DensityOperator::pure(&v).unwrap(),
            )
            .unwrap();
            assert!((got - want).abs() < 1e-7);
        }
    }
}
