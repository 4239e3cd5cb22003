//! Deficiency δ, its symmetrization Δ, and the randomization preorder on
//! labelled families of states.

use std::collections::HashSet;

use crate::channels::Channel;
use crate::conic::{
    self, hermitian_basis, strict_split, BlockMatrix, BlockSpec, LinearFunctional, Residuals,
    SdpProblem, SolveOptions, SolveStatus,
};
use crate::divergences::{chebyshev_divergence, trace_distance, DivergenceKind};
use crate::error::{Error, Result};
use crate::operators::{hermitian_eigen, CMatrix, DensityOperator};

/// Tolerance at which the extracted optimal channel is re-validated.
pub const CHANNEL_TOL: f64 = 1e-7;
/// Default tolerance for the preorder and equivalence tests.
pub const DEFAULT_TOL: f64 = 1e-6;

/// A nonempty, uniquely labelled family of states on a common space.
#[derive(Clone, Debug)]
pub struct StateFamily {
    dim: usize,
    entries: Vec<(String, DensityOperator)>,
}

impl StateFamily {
    pub fn new(entries: Vec<(String, DensityOperator)>) -> Result<Self> {
        let dim = entries.first().ok_or(Error::EmptyFamily)?.1.dim();
        let mut seen = HashSet::new();
        for (label, state) in &entries {
            if state.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: state.dim(),
                });
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { dim, entries })
    }

    /// Labels `0, 1, …` in order.
    pub fn from_states(states: Vec<DensityOperator>) -> Result<Self> {
        Self::new(
            states
                .into_iter()
                .enumerate()
                .map(|(i, s)| (i.to_string(), s))
                .collect(),
        )
    }

    /// The one-point family assigning `state` to every label.
    pub fn constant<S: AsRef<str>>(labels: &[S], state: &DensityOperator) -> Result<Self> {
        Self::new(
            labels
                .iter()
                .map(|l| (l.as_ref().to_string(), state.clone()))
                .collect(),
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

    pub fn entries(&self) -> &[(String, DensityOperator)] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(l, _)| l.as_str())
    }

    pub fn states(&self) -> impl Iterator<Item = &DensityOperator> {
        self.entries.iter().map(|(_, s)| s)
    }

    pub fn get(&self, label: &str) -> Result<&DensityOperator> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// `Λ(E) = {Λ(ρ_θ)}` with labels preserved.
    pub fn map_channel(&self, channel: &Channel) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|(l, s)| Ok((l.clone(), channel.apply(s)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Subfamily on the given labels, in the order given.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let entries = labels
            .iter()
            .map(|l| Ok((l.as_ref().to_string(), self.get(l.as_ref())?.clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Pairs `(ρ_θ, σ_θ)` in this family's label order; label sets must agree.
    pub fn matched<'a>(
        &'a self,
        other: &'a StateFamily,
    ) -> Result<Vec<(&'a DensityOperator, &'a DensityOperator)>> {
        if self.len() != other.len() {
            return Err(Error::LabelMismatch);
        }
        self.entries
            .iter()
            .map(|(l, s)| {
                other
                    .get(l)
                    .map(|o| (s, o))
                    .map_err(|_| Error::LabelMismatch)
            })
            .collect()
    }
}

/// Solver diagnostics carried alongside a deficiency value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverReport {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct DeficiencyResult {
    /// `δ(E, F) ∈ [0, 2]`.
    pub value: f64,
    /// The minimizing randomization; `None` only if it failed re-validation
    /// (the value is still certified), in which case `warning` says why.
    pub optimal_channel: Option<Channel>,
    pub solver_report: SolverReport,
    pub warning: Option<String>,
}

/// `‖E − F‖₁ = max_θ ‖ρ_θ − σ_θ‖₁` for label-matched families.
pub fn sup_distance(e: &StateFamily, f: &StateFamily) -> Result<f64> {
    if e.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            found: f.dim(),
        });
    }
    e.matched(f)?
        .into_iter()
        .map(|(a, b)| trace_distance(a, b))
        .try_fold(0.0, |acc, v| v.map(|v| f64::max(acc, v)))
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Builds the δ(E, F) program: minimize t over a Choi matrix `J` and
/// positive/negative parts of each residual `Λ_J(ρ_θ) − σ_θ`.
pub fn deficiency_problem(e: &StateFamily, f: &StateFamily) -> Result<SdpProblem> {
    let pairs = e.matched(f)?;
    let (din, dout) = (e.dim(), f.dim());
    let k = pairs.len();
    let mut blocks = vec![BlockSpec::Hermitian(din * dout)];
    for _ in 0..k {
        blocks.push(BlockSpec::Hermitian(dout));
        blocks.push(BlockSpec::Hermitian(dout));
    }
    let slack_block = blocks.len();
    blocks.push(BlockSpec::Nonnegative(k));
    let t_block = blocks.len();
    // t ≥ tr(P+Q) ≥ 0, so a sign constraint costs nothing and avoids a free column.
    blocks.push(BlockSpec::Nonnegative(1));
    let mut p = SdpProblem::new(blocks);
    p.set_objective(LinearFunctional::new().with(t_block, BlockMatrix::Vector(vec![1.0])));

    let out_basis = hermitian_basis(dout);
    let eye_out = CMatrix::identity(dout, dout);
    for (j, (rho, sigma)) in pairs.iter().enumerate() {
        let (pb, qb) = (1 + 2 * j, 2 + 2 * j);
        let rho_t = rho.matrix().transpose();
        // tr(B Λ(ρ)) = tr((ρᵀ ⊗ B) J)
        for bm in &out_basis {
            p.add_constraint(
                LinearFunctional::new()
                    .with(0, BlockMatrix::Complex(kron(&rho_t, bm)))
                    .with(pb, BlockMatrix::Complex(-bm.clone()))
                    .with(qb, BlockMatrix::Complex(bm.clone())),
                (bm * sigma.matrix()).trace().re,
            );
        }
        let mut unit = vec![0.0; k];
        unit[j] = 1.0;
        p.add_constraint(
            LinearFunctional::new()
                .with(pb, BlockMatrix::Complex(eye_out.clone()))
                .with(qb, BlockMatrix::Complex(eye_out.clone()))
                .with(slack_block, BlockMatrix::Vector(unit))
                .with(t_block, BlockMatrix::Vector(vec![-1.0])),
            0.0,
        );
    }
    // Tr_out J = I
    for bm in hermitian_basis(din) {
        let rhs = bm.trace().re;
        p.add_constraint(
            LinearFunctional::new().with(0, BlockMatrix::Complex(kron(&bm, &eye_out))),
            rhs,
        );
    }

    // Start from the completely depolarizing channel.
    let j0 = CMatrix::identity(din * dout, din * dout).map(|z| z / dout as f64);
    let mixed = eye_out.map(|z| z / dout as f64);
    let splits: Vec<(CMatrix, CMatrix)> = pairs
        .iter()
        .map(|(_, s)| strict_split(&(&mixed - s.matrix()), 0.01))
        .collect();
    let widths: Vec<f64> = splits
        .iter()
        .map(|(a, b)| a.trace().re + b.trace().re)
        .collect();
    let t0 = widths.iter().map(|w| w + 0.1).fold(2.1, f64::max);
    let mut x0 = vec![BlockMatrix::Complex(j0)];
    for (a, b) in splits {
        x0.push(BlockMatrix::Complex(a));
        x0.push(BlockMatrix::Complex(b));
    }
    x0.push(BlockMatrix::Vector(widths.iter().map(|w| t0 - w).collect()));
    x0.push(BlockMatrix::Vector(vec![t0]));
    p.set_interior_point(x0);
    Ok(p)
}

/// Projects a near-feasible Choi matrix onto CPTP maps: clip negative
/// eigenvalues, then restore `Tr_out J = I` by congruence with `T^{-1/2} ⊗ I`.
fn extract_channel(j: &CMatrix, din: usize, dout: usize) -> Result<Channel> {
    let spec = hermitian_eigen(j);
    let clipped = spec.map(|v| v.max(0.0));
    let t = crate::channels::partial_trace_output(&clipped, din, dout);
    let ts = hermitian_eigen(&t);
    if ts.min() <= 0.0 {
        return Err(Error::NotPsd(ts.min()));
    }
    let t_inv_sqrt = ts.map(|v| 1.0 / v.sqrt());
    let w = kron(&t_inv_sqrt, &CMatrix::identity(dout, dout));
    let fixed = &w * clipped * w.adjoint();
    Channel::from_choi_with_tol(fixed, din, dout, CHANNEL_TOL)
}

/// `δ(E, F) = inf_Λ sup_θ ‖Λ(ρ_θ) − σ_θ‖₁`, solved exactly as an SDP.
pub fn deficiency_delta(
    e: &StateFamily,
    f: &StateFamily,
    opts: &SolveOptions,
) -> Result<DeficiencyResult> {
    let p = deficiency_problem(e, f)?;
    let sol = conic::solve(&p, opts)?.require_usable()?;
    let report = SolverReport {
        status: sol.status,
        primal_value: sol.primal_value,
        dual_value: sol.dual_value,
        residuals: sol.residuals,
        iterations: sol.iterations,
    };
    let BlockMatrix::Complex(j) = &sol.blocks[0] else {
        unreachable!("Choi block is Hermitian")
    };
    let (optimal_channel, mut warning) = match extract_channel(j, e.dim(), f.dim()) {
        Ok(ch) => (Some(ch), None),
        Err(err) => (
            None,
            Some(format!("optimal channel failed re-validation: {err}")),
        ),
    };
    if sol.status == SolveStatus::Inaccurate {
        let r = sol.residuals;
        let note = format!(
            "solver stalled short of tolerance (gap {:.1e}, pinf {:.1e}, dinf {:.1e})",
            r.relative_gap, r.primal_infeasibility, r.dual_infeasibility
        );
        warning = Some(match warning {
            Some(w) => format!("{note}; {w}"),
            None => note,
        });
    }
    Ok(DeficiencyResult {
        value: sol.primal_value.clamp(0.0, 2.0),
        optimal_channel,
        solver_report: report,
        warning,
    })
}

/// `Δ(E, F) = max{δ(E, F), δ(F, E)}`.
#[allow(non_snake_case)]
pub fn deficiency_Delta(e: &StateFamily, f: &StateFamily, opts: &SolveOptions) -> Result<f64> {
    let fw = deficiency_delta(e, f, opts)?.value;
    let bw = deficiency_delta(f, e, opts)?.value;
    Ok(fw.max(bw))
}

/// `E ⪰ F`, i.e. `δ(E, F) ≤ tol`.
pub fn is_more_informative(
    e: &StateFamily,
    f: &StateFamily,
    tol: f64,
    opts: &SolveOptions,
) -> Result<bool> {
    Ok(deficiency_delta(e, f, opts)?.value <= tol)
}

/// `E ≡ F`, i.e. `Δ(E, F) ≤ tol`.
pub fn is_equivalent(
    e: &StateFamily,
    f: &StateFamily,
    tol: f64,
    opts: &SolveOptions,
) -> Result<bool> {
    Ok(deficiency_Delta(e, f, opts)? <= tol)
}

/// `min_σ max_θ ‖σ − ρ_θ‖₁`, which equals δ from any one-point family to `E`.
pub fn chebyshev_radius(e: &StateFamily, opts: &SolveOptions) -> Result<f64> {
    let states: Vec<&DensityOperator> = e.states().collect();
    Ok(chebyshev_divergence(&DivergenceKind::TraceDistance, &states, opts)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::compose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    fn poles() -> StateFamily {
        StateFamily::from_states(vec![
            DensityOperator::basis_state(2, 0),
            DensityOperator::basis_state(2, 1),
        ])
        .unwrap()
    }

    fn noisy_poles() -> StateFamily {
        StateFamily::from_states(vec![
            DensityOperator::diagonal(&[0.9, 0.1]).unwrap(),
            DensityOperator::diagonal(&[0.1, 0.9]).unwrap(),
        ])
        .unwrap()
    }

    fn random_family(d: usize, k: usize, rng: &mut ChaCha8Rng) -> StateFamily {
        StateFamily::from_states((0..k).map(|_| DensityOperator::random(d, rng)).collect()).unwrap()
    }

    fn check_value_is_attained(e: &StateFamily, f: &StateFamily, r: &DeficiencyResult) {
        let ch = r.optimal_channel.as_ref().expect("channel extracted");
        let direct = sup_distance(&e.map_channel(ch).unwrap(), f).unwrap();
        assert!(
            (direct - r.value).abs() < 1e-6,
            "direct {direct} vs {}",
            r.value
        );
    }

    #[test]
    fn family_validation() {
        let z = DensityOperator::basis_state(2, 0);
        assert!(matches!(StateFamily::new(vec![]), Err(Error::EmptyFamily)));
        assert!(matches!(
            StateFamily::new(vec![("a".into(), z.clone()), ("a".into(), z.clone())]),
            Err(Error::DuplicateLabel(_))
        ));
        assert!(matches!(
            StateFamily::new(vec![
                ("a".into(), z.clone()),
                ("b".into(), DensityOperator::basis_state(3, 0))
            ]),
            Err(Error::DimensionMismatch { .. })
        ));
        let e = StateFamily::new(vec![("a".into(), z.clone())]).unwrap();
        let f = StateFamily::new(vec![("b".into(), z)]).unwrap();
        assert!(matches!(
            deficiency_delta(&e, &f, &opts()),
            Err(Error::LabelMismatch)
        ));
    }

    #[test]
    fn randomized_family_has_zero_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..5 {
            let e = random_family(2 + seed as usize % 2, 3, &mut rng);
            let ch = Channel::random(e.dim(), seed);
            let f = e.map_channel(&ch).unwrap();
            let r = deficiency_delta(&e, &f, &opts()).unwrap();
            assert!(r.value <= 1e-6, "{}", r.value);
            check_value_is_attained(&e, &f, &r);
        }
    }

    #[test]
    fn singletons_have_zero_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = StateFamily::from_states(vec![DensityOperator::random(2, &mut rng)]).unwrap();
        let f = StateFamily::from_states(vec![DensityOperator::random(2, &mut rng)]).unwrap();
        assert!(deficiency_delta(&e, &f, &opts()).unwrap().value <= 1e-6);
    }

    #[test]
    fn dichotomy_fixture() {
        let fw = deficiency_delta(&poles(), &noisy_poles(), &opts()).unwrap();
        let bw = deficiency_delta(&noisy_poles(), &poles(), &opts()).unwrap();
        assert!(fw.value <= 1e-6);
        assert!((bw.value - 0.2).abs() < 1e-6, "{}", bw.value);
        check_value_is_attained(&noisy_poles(), &poles(), &bw);
        assert!((deficiency_Delta(&poles(), &noisy_poles(), &opts()).unwrap() - 0.2).abs() < 1e-6);
        assert!(!is_equivalent(&poles(), &noisy_poles(), DEFAULT_TOL, &opts()).unwrap());
        assert!(is_more_informative(&poles(), &noisy_poles(), DEFAULT_TOL, &opts()).unwrap());
    }

    #[test]
    fn poles_against_one_point_family() {
        let one = StateFamily::constant(&["0", "1"], &DensityOperator::maximally_mixed(2)).unwrap();
        assert!((deficiency_Delta(&poles(), &one, &opts()).unwrap() - 1.0).abs() < 1e-6);
        assert!(!is_more_informative(&one, &poles(), DEFAULT_TOL, &opts()).unwrap());
        assert!((chebyshev_radius(&poles(), &opts()).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn self_and_unitary_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = random_family(3, 3, &mut rng);
        let r = deficiency_delta(&e, &e, &opts()).unwrap();
        assert!(r.value <= 1e-7);
        assert!(is_equivalent(&e, &e, DEFAULT_TOL, &opts()).unwrap());
        let g = crate::operators::random_ginibre(3, 3, &mut rng);
        let u = g.qr().q();
        let ue = e.map_channel(&Channel::unitary(&u).unwrap()).unwrap();
        assert!(is_equivalent(&e, &ue, DEFAULT_TOL, &opts()).unwrap());
    }

    #[test]
    fn poles_dominate_any_diagonal_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3 {
            let states = (0..2)
                .map(|_| {
                    let a: f64 = rng.random();
                    DensityOperator::diagonal(&[a, 1.0 - a]).unwrap()
                })
                .collect();
            let f = StateFamily::from_states(states).unwrap();
            assert!(is_more_informative(&poles(), &f, DEFAULT_TOL, &opts()).unwrap());
        }
    }

    #[test]
    fn circumradius_of_coplanar_bloch_vectors() {
        // Three points on a circle of radius r about c in the z = 0.1 plane:
        // the enclosing ball is the circumcircle since they span > 180°.
        let (r, cx, cy) = (0.5, 0.1, -0.2);
        let states: Vec<DensityOperator> = [0.0f64, 2.2, 4.1]
            .iter()
            .map(|a| {
                DensityOperator::from_bloch([cx + r * a.cos(), cy + r * a.sin(), 0.1]).unwrap()
            })
            .collect();
        let e = StateFamily::from_states(states).unwrap();
        assert!((chebyshev_radius(&e, &opts()).unwrap() - r).abs() < 1e-6);
        let one =
            StateFamily::constant(&["0", "1", "2"], &DensityOperator::maximally_mixed(2)).unwrap();
        assert!((deficiency_delta(&one, &e, &opts()).unwrap().value - r).abs() < 1e-6);
    }

    #[test]
    fn metric_properties_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..6u64 {
            let (e, f, g) = (
                random_family(2, 2, &mut rng),
                random_family(2, 2, &mut rng),
                random_family(2, 2, &mut rng),
            );
            let d =
                |a: &StateFamily, b: &StateFamily| deficiency_delta(a, b, &opts()).unwrap().value;
            assert!(d(&e, &g) <= d(&e, &f) + d(&f, &g) + 1e-6);
            let big = |a: &StateFamily, b: &StateFamily| deficiency_Delta(a, b, &opts()).unwrap();
            assert!(big(&e, &g) <= big(&e, &f) + big(&f, &g) + 1e-6);
            let ch = Channel::random(2, 100 + seed);
            // Applying one channel to both families contracts the sup distance.
            let (le, lf) = (e.map_channel(&ch).unwrap(), f.map_channel(&ch).unwrap());
            assert!(sup_distance(&le, &lf).unwrap() <= sup_distance(&e, &f).unwrap() + 1e-9);
            assert!(big(&e, &f) <= sup_distance(&e, &f).unwrap() + 1e-6);
        }
    }

    #[test]
    fn common_channel_can_increase_big_delta() {
        // Z poles and X poles are unitarily equivalent, but full dephasing in
        // the Z basis keeps the first family and erases the second.
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[1.0, 1.0, 1.0, -1.0].map(|v| crate::operators::c(v / 2f64.sqrt(), 0.0)),
        );
        let x_poles = poles().map_channel(&Channel::unitary(&h).unwrap()).unwrap();
        assert!(deficiency_Delta(&poles(), &x_poles, &opts()).unwrap() <= 1e-6);
        let dephase = Channel::dephasing(1.0, 2).unwrap();
        let after = deficiency_Delta(
            &poles().map_channel(&dephase).unwrap(),
            &x_poles.map_channel(&dephase).unwrap(),
            &opts(),
        )
        .unwrap();
        assert!((after - 1.0).abs() < 1e-6, "{after}");
    }

    #[test]
    fn composed_channels_stay_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let e = random_family(2, 3, &mut rng);
        let (a, b) = (Channel::random(2, 1), Channel::random(2, 2));
        let e1 = e.map_channel(&a).unwrap();
        let e2 = e.map_channel(&compose(&b, &a).unwrap()).unwrap();
        assert!(deficiency_delta(&e1, &e2, &opts()).unwrap().value <= 1e-6);
    }

    #[test]
    fn rectangular_output_space() {
        // Qubit poles → qutrit family living on the first two levels.
        let f = StateFamily::from_states(vec![
            DensityOperator::diagonal(&[0.7, 0.3, 0.0]).unwrap(),
            DensityOperator::diagonal(&[0.2, 0.2, 0.6]).unwrap(),
        ])
        .unwrap();
        let r = deficiency_delta(&poles(), &f, &opts()).unwrap();
        assert!(r.value <= 1e-6);
        let ch = r.optimal_channel.unwrap();
        assert_eq!((ch.dim_in(), ch.dim_out()), (2, 3));
    }
}
