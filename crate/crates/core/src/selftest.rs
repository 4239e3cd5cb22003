//! Acceptance suites: property and oracle checks of the library at desk
//! scale. Each suite is deterministic (fixed seeds) and reports how many
//! checks it ran, how many failed, and the worst observed margin.

use std::fmt;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channels::{pauli_x, Channel};
use crate::classical::{lp_deficiency, ClassicalFamily, ProbabilityVector};
use crate::conic::{self, fixtures, SolveAudit, SolveOptions, SolveStatus};
use crate::deficiency::{deficiency_Delta, deficiency_delta, StateFamily};
use crate::divergences::{fidelity, trace_distance, DivergenceSpec};
use crate::error::Result;
use crate::markov::{
    estimate_limit_family, fixed_point_check, monotone_trace, proof_bound_check,
    weak_ergodicity_test, ChainScenario, ChannelSource, LimitEstimate, LimitMode,
    DEFAULT_LIMIT_TOL, DEFAULT_WINDOW,
};
use crate::operators::{
    matrix_power, operator_norm, random_unitary, DensityOperator, HermitianOperator,
};

/// Outcome of one suite.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: &'static str,
    pub criterion: u8,
    pub checks: usize,
    pub failures: usize,
    /// One line per sub-check: what was measured and the worst value seen.
    pub notes: Vec<String>,
    /// Set when the suite aborted on a library error.
    pub error: Option<String>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.error.is_none()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<24} [{:>2}] {}  {}/{} checks ok  ({:.1}s)",
            self.name,
            self.criterion,
            if self.passed() { "PASS" } else { "FAIL" },
            self.checks - self.failures,
            self.checks,
            self.seconds
        )?;
        if let Some(e) = &self.error {
            write!(f, "  error: {e}")?;
        }
        Ok(())
    }
}

/// Accumulates checks inside a suite.
struct Tally {
    checks: usize,
    failures: usize,
    notes: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            checks: 0,
            failures: 0,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool) -> bool {
        self.checks += 1;
        if !ok {
            self.failures += 1;
        }
        ok
    }

    fn note(&mut self, line: String) {
        self.notes.push(line);
    }
}

/// Running worst value of a margin (`bound − value`, negative = violated).
struct Worst {
    label: &'static str,
    checks: usize,
    failed: usize,
    min_margin: f64,
}

impl Worst {
    fn new(label: &'static str) -> Self {
        Self {
            label,
            checks: 0,
            failed: 0,
            min_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, tally: &mut Tally, margin: f64) {
        self.checks += 1;
        self.min_margin = self.min_margin.min(margin);
        if !tally.check(margin >= 0.0) {
            self.failed += 1;
        }
    }

    fn finish(self, tally: &mut Tally) {
        tally.note(format!(
            "{}: {}/{} hold, worst margin {:.3e}",
            self.label,
            self.checks - self.failed,
            self.checks,
            self.min_margin
        ));
    }
}

pub struct Suite {
    pub name: &'static str,
    pub criterion: u8,
    pub summary: &'static str,
    run: fn(&SolveOptions, &mut Tally) -> Result<()>,
}

/// All suites in criterion order. The solver suite must run last: it
/// audits every solve made by the suites before it.
pub fn suites() -> &'static [Suite] {
    &SUITES
}

static SUITES: [Suite; 12] = [
    Suite {
        name: "randomization",
        criterion: 1,
        summary: "δ(E, Λ(E)) = 0 for random E, Λ",
        run: randomization,
    },
    Suite {
        name: "classical",
        criterion: 2,
        summary: "SDP deficiency matches the LP on diagonal families",
        run: classical,
    },
    Suite {
        name: "metric-axioms",
        criterion: 3,
        summary: "triangle inequalities and CPTP monotonicity of Δ",
        run: metric_axioms,
    },
    Suite {
        name: "convergence",
        criterion: 4,
        summary: "limit estimation, monotone order and the proof bound",
        run: convergence,
    },
    Suite {
        name: "ergodicity",
        criterion: 5,
        summary: "contraction closed form and unitary chains",
        run: ergodicity,
    },
    Suite {
        name: "fixed-point",
        criterion: 6,
        summary: "Δ(Γ(E_∞), E_∞) for homogeneous chains",
        run: fixed_point,
    },
    Suite {
        name: "divergence-convergence",
        criterion: 7,
        summary: "monotone divergence traces reach the limit value",
        run: divergence_convergence,
    },
    Suite {
        name: "fuchs-van-de-graaf",
        criterion: 8,
        summary: "1 − F ≤ ½‖ρ − σ‖₁ ≤ √(1 − F²)",
        run: fuchs_van_de_graaf,
    },
    Suite {
        name: "fidelity-angle",
        criterion: 8,
        summary: "triangle inequality for arccos F",
        run: fidelity_angle,
    },
    Suite {
        name: "operator-monotone",
        criterion: 8,
        summary: "‖A^α − B^α‖ ≤ ‖A − B‖^α",
        run: operator_monotone,
    },
    Suite {
        name: "chebyshev",
        criterion: 9,
        summary: "δ(one-point, E) is the Bloch enclosing-ball radius",
        run: chebyshev,
    },
    Suite {
        name: "solver",
        criterion: 10,
        summary: "analytic fixtures, weak duality and determinism",
        run: solver_invariants,
    },
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

/// Runs the suites whose name equals `only` (all when `None`) with the given
/// solver tolerance template. Library errors inside a suite mark it failed.
pub fn run_suites(only: Option<&str>, base: &SolveOptions) -> Vec<SuiteReport> {
    let audit = SolveAudit::new();
    let opts = base.detached().with_audit(audit.clone());
    SUITES
        .iter()
        .filter(|s| only.is_none_or(|n| n == s.name))
        .map(|suite| {
            let start = Instant::now();
            let mut tally = Tally::new();
            let outcome = if suite.name == "solver" {
                solver_with_audit(base, &audit, &mut tally)
            } else {
                (suite.run)(&opts, &mut tally)
            };
            SuiteReport {
                name: suite.name,
                criterion: suite.criterion,
                checks: tally.checks,
                failures: tally.failures,
                notes: tally.notes,
                error: outcome.err().map(|e| e.to_string()),
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DensityOperator {
    // Mix in pure states so boundary cases are exercised.
    if rng.random_range(0..3) == 0 {
        DensityOperator::random_pure(d, rng)
    } else {
        DensityOperator::random(d, rng)
    }
}

fn random_family(d: usize, k: usize, rng: &mut ChaCha8Rng) -> StateFamily {
    StateFamily::from_states((0..k).map(|_| random_state(d, rng)).collect())
        .expect("random states share a dimension")
}

fn poles() -> StateFamily {
    StateFamily::from_states(vec![
        DensityOperator::basis_state(2, 0),
        DensityOperator::basis_state(2, 1),
    ])
    .expect("basis states form a family")
}

fn randomization(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = Worst::new("δ(E, Λ(E)) ≤ 1e-6 over 100 instances, d ∈ {2,3}, |Θ| ∈ {2,3}");
    for trial in 0..100 {
        let d = 2 + trial % 2;
        let k = 2 + (trial / 2) % 2;
        let e = random_family(d, k, &mut rng);
        let lambda = Channel::random(d, rng.next_u64());
        let v = deficiency_delta(&e, &e.map_channel(&lambda)?, opts)?.value;
        worst.record(t, 1e-6 - v);
    }
    worst.finish(t);
    Ok(())
}

fn classical(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = Worst::new("|δ_SDP − δ_LP| ≤ 1e-6 over 50 diagonal instances, n ≤ 4, |Θ| ≤ 4");
    for _ in 0..50 {
        let (n, m, k) = (
            rng.random_range(2..=4),
            rng.random_range(2..=4),
            rng.random_range(2..=4),
        );
        let e = ClassicalFamily::from_vectors(
            (0..k)
                .map(|_| ProbabilityVector::random(n, &mut rng))
                .collect(),
        )?;
        let f = ClassicalFamily::from_vectors(
            (0..k)
                .map(|_| ProbabilityVector::random(m, &mut rng))
                .collect(),
        )?;
        let lp = lp_deficiency(&e, &f, opts)?.value;
        let sdp = deficiency_delta(&e.to_quantum(), &f.to_quantum(), opts)?.value;
        worst.record(t, 1e-6 - (lp - sdp).abs());
    }
    worst.finish(t);

    let e = ClassicalFamily::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let f = ClassicalFamily::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]])?;
    let mut fixture =
        Worst::new("dichotomy fixture: δ(E,F) = 0 and δ(F,E) = 0.2 within 1e-6 (LP and SDP)");
    for (value, want) in [
        (lp_deficiency(&e, &f, opts)?.value, 0.0),
        (lp_deficiency(&f, &e, opts)?.value, 0.2),
        (
            deficiency_delta(&e.to_quantum(), &f.to_quantum(), opts)?.value,
            0.0,
        ),
        (
            deficiency_delta(&f.to_quantum(), &e.to_quantum(), opts)?.value,
            0.2,
        ),
    ] {
        fixture.record(t, 1e-6 - (value - want).abs());
    }
    fixture.finish(t);
    Ok(())
}

fn metric_axioms(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut small = Worst::new("δ(A,C) ≤ δ(A,B) + δ(B,C) + 1e-6 on 100 triples");
    let mut big = Worst::new("Δ(A,C) ≤ Δ(A,B) + Δ(B,C) + 1e-6 on 100 triples");
    for _ in 0..100 {
        let (a, b, c) = (
            random_family(2, 2, &mut rng),
            random_family(2, 2, &mut rng),
            random_family(2, 2, &mut rng),
        );
        let d = |x: &StateFamily, y: &StateFamily| deficiency_delta(x, y, opts).map(|r| r.value);
        let (ab, ba, bc, cb, ac, ca) = (
            d(&a, &b)?,
            d(&b, &a)?,
            d(&b, &c)?,
            d(&c, &b)?,
            d(&a, &c)?,
            d(&c, &a)?,
        );
        small.record(t, ab + bc + 1e-6 - ac);
        big.record(t, ab.max(ba) + bc.max(cb) + 1e-6 - ac.max(ca));
    }
    small.finish(t);
    big.finish(t);

    let mut mono = Worst::new("Δ(Λ(A),Λ(B)) ≤ Δ(A,B) + 1e-6 on 100 pairs");
    for _ in 0..100 {
        let (a, b) = (random_family(2, 2, &mut rng), random_family(2, 2, &mut rng));
        let lambda = Channel::random(2, rng.next_u64());
        let before = deficiency_Delta(&a, &b, opts)?;
        let after = deficiency_Delta(&a.map_channel(&lambda)?, &b.map_channel(&lambda)?, opts)?;
        mono.record(t, before + 1e-6 - after);
    }
    mono.finish(t);
    Ok(())
}

/// One scenario of the convergence suite.
pub struct NamedScenario {
    pub name: String,
    pub scenario: ChainScenario,
    /// The repeated channel, for homogeneous scenarios.
    pub homogeneous: Option<Channel>,
}

/// The twenty chains used by the convergence and fixed-point suites:
/// homogeneous depolarizing, dephasing and amplitude-damping chains, and
/// random inhomogeneous chains.
pub fn convergence_scenarios() -> Result<Vec<NamedScenario>> {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut out = Vec::new();
    let homogeneous = |name: String,
                       channel: Channel,
                       d: usize,
                       horizon: usize,
                       rng: &mut ChaCha8Rng|
     -> Result<NamedScenario> {
        let family = random_family(d, 3, rng);
        Ok(NamedScenario {
            name,
            scenario: ChainScenario::homogeneous(family, channel.clone(), horizon)?,
            homogeneous: Some(channel),
        })
    };
    for p in [0.2, 0.3, 0.5, 0.7] {
        out.push(homogeneous(
            format!("depolarizing({p}), d=2"),
            Channel::depolarizing(p, 2)?,
            2,
            100,
            &mut rng,
        )?);
    }
    out.push(homogeneous(
        "depolarizing(0.5), d=3".into(),
        Channel::depolarizing(0.5, 3)?,
        3,
        40,
        &mut rng,
    )?);
    for lambda in [0.3, 0.5, 0.8] {
        out.push(homogeneous(
            format!("dephasing({lambda}), d=2"),
            Channel::dephasing(lambda, 2)?,
            2,
            60,
            &mut rng,
        )?);
    }
    for gamma in [0.5, 0.7] {
        out.push(homogeneous(
            format!("amplitude_damping({gamma})"),
            Channel::amplitude_damping(gamma)?,
            2,
            60,
            &mut rng,
        )?);
    }
    for seed in 0..10u64 {
        let d = if seed < 8 { 2 } else { 3 };
        let family = random_family(d, 3, &mut rng);
        out.push(NamedScenario {
            name: format!("random(seed={seed}), d={d}"),
            scenario: ChainScenario::new(family, ChannelSource::Random { seed }, 60)?,
            homogeneous: None,
        });
    }
    Ok(out)
}

fn limit_of(s: &ChainScenario, opts: &SolveOptions) -> Result<LimitEstimate> {
    estimate_limit_family(s, DEFAULT_WINDOW, DEFAULT_LIMIT_TOL, opts)
}

fn convergence(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut converged = Worst::new("estimate_limit_family converges on 20 scenarios");
    let mut order = Worst::new("δ(E_i, E_{i+1}) ≤ 1e-6 at every step");
    let mut distance = Worst::new("Δ(E_i, E_∞) nonincreasing within 1e-6");
    let mut bound = Worst::new("δ(E_∞, E_i) ≤ d²·sup|α|·δ(Ẽ_∞, Ẽ_i) + 1e-6");
    for named in convergence_scenarios()? {
        let s = &named.scenario;
        let est = limit_of(s, opts)?;
        let ok = est.mode == LimitMode::Converged;
        converged.record(t, if ok { 0.0 } else { -1.0 });
        if !ok {
            t.note(format!("{}: mode {:?}", named.name, est.mode));
            continue;
        }
        let families = s.families()?;
        for w in families.windows(2) {
            order.record(t, 1e-6 - deficiency_delta(&w[0], &w[1], opts)?.value);
        }
        let to_limit = families
            .iter()
            .map(|f| deficiency_Delta(f, &est.family, opts))
            .collect::<Result<Vec<_>>>()?;
        for w in to_limit.windows(2) {
            distance.record(t, w[0] + 1e-6 - w[1]);
        }
        let pb = proof_bound_check(s, &est, opts)?;
        bound.record(t, 1e-6 - pb.max_excess);
    }
    converged.finish(t);
    order.finish(t);
    distance.finish(t);
    bound.finish(t);
    Ok(())
}

fn ergodicity(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    let s = ChainScenario::homogeneous(poles(), Channel::depolarizing(0.3, 2)?, 45)?;
    let r = weak_ergodicity_test(&s, 1e-6, opts)?;
    let mut closed = Worst::new("contraction_sup(S_i) = 2·0.7^i within 1e-8 for i ≤ 30");
    for (i, c) in r.contraction.iter().enumerate().take(31) {
        closed.record(t, 1e-8 - (c - 2.0 * 0.7f64.powi(i as i32)).abs());
    }
    closed.finish(t);
    t.check(r.ergodic_at == Some(41));
    t.note(format!(
        "depolarizing(0.3): ergodic_at = {:?} (expected Some(41))",
        r.ergodic_at
    ));
    t.check(r.consistent);
    t.note(format!(
        "Chebyshev radii bounded by contraction values: {}",
        r.consistent
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let chains = vec![
        (
            "unitary(X) on poles",
            ChainScenario::homogeneous(poles(), Channel::unitary(&pauli_x())?, 12)?,
        ),
        (
            "Haar unitary, d=2",
            ChainScenario::homogeneous(
                random_family(2, 3, &mut rng),
                Channel::unitary(&random_unitary(2, &mut rng))?,
                12,
            )?,
        ),
        (
            "Haar unitary, d=3",
            ChainScenario::homogeneous(
                random_family(3, 3, &mut rng),
                Channel::unitary(&random_unitary(3, &mut rng))?,
                8,
            )?,
        ),
    ];
    let mut reversible = Worst::new("unitary chains: Δ(E_i, E_0) ≤ 1e-6 for all i");
    for (name, s) in chains {
        let r = weak_ergodicity_test(&s, 1e-6, opts)?;
        t.check(r.ergodic_at.is_none());
        t.note(format!(
            "{name}: ergodic_at = {:?} (expected None)",
            r.ergodic_at
        ));
        let families = s.families()?;
        for f in &families {
            reversible.record(t, 1e-6 - deficiency_Delta(f, &families[0], opts)?);
        }
    }
    reversible.finish(t);
    Ok(())
}

fn fixed_point(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut worst = Worst::new("Δ(Γ(E_∞), E_∞) ≤ 1e-5 for the homogeneous scenarios");
    for named in convergence_scenarios()? {
        let Some(gamma) = &named.homogeneous else {
            continue;
        };
        let est = limit_of(&named.scenario, opts)?;
        let r = fixed_point_check(gamma, &est.family, 1e-5, opts)?;
        worst.record(t, 1e-5 - r.delta_value);
    }
    worst.finish(t);
    Ok(())
}

fn divergence_convergence(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let plus = DensityOperator::pure(&nalgebra::DVector::from_vec(vec![
        crate::operators::c(1.0, 0.0),
        crate::operators::c(1.0, 0.0),
    ]))?;
    let family = StateFamily::from_states(vec![
        DensityOperator::basis_state(2, 0),
        plus,
        DensityOperator::random(2, &mut rng),
    ])?;
    let s = ChainScenario::homogeneous(family.clone(), Channel::depolarizing(0.3, 2)?, 60)?;
    // Depolarizing drives every state to I/2: the analytic limit is the
    // one-point family, where every divergence vanishes.
    let labels: Vec<String> = family.labels().map(str::to_string).collect();
    let limit = StateFamily::constant(&labels, &DensityOperator::maximally_mixed(2))?;
    let specs = [
        DivergenceSpec::trace_distance(),
        DivergenceSpec::one_minus_fidelity(),
        DivergenceSpec::alpha(0.5)?,
        DivergenceSpec::alpha(-0.5)?,
    ];
    let mut mono = Worst::new("traces nonincreasing within 1e-9");
    let mut gap = Worst::new("|D_N − D(E_∞)| ≤ 1e-4 at the analytic limit");
    for spec in &specs {
        for pair in [["0", "1"], ["1", "2"], ["0", "2"]] {
            let pair: Vec<String> = pair.iter().map(|l| l.to_string()).collect();
            let m = monotone_trace(&s, spec, &pair, Some(&limit), opts)?;
            mono.record(t, 1e-9 - m.max_violation);
            gap.record(t, 1e-4 - m.limit_gap.unwrap_or(f64::INFINITY));
        }
    }
    mono.finish(t);
    gap.finish(t);
    Ok(())
}

fn fuchs_van_de_graaf(_: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut lower = Worst::new("1 − F ≤ ½‖ρ − σ‖₁ + 1e-9 on 1000 qubit pairs");
    let mut upper = Worst::new("½‖ρ − σ‖₁ ≤ √(1 − F²) + 1e-9 on 1000 qubit pairs");
    for _ in 0..1000 {
        let (a, b) = (random_state(2, &mut rng), random_state(2, &mut rng));
        let f = fidelity(&a, &b)?;
        let half = 0.5 * trace_distance(&a, &b)?;
        lower.record(t, half + 1e-9 - (1.0 - f));
        upper.record(t, (1.0 - f * f).max(0.0).sqrt() + 1e-9 - half);
    }
    lower.finish(t);
    upper.finish(t);
    Ok(())
}

fn fidelity_angle(_: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut worst =
        Worst::new("arccos F(ρ₁,ρ₃) ≤ arccos F(ρ₁,ρ₂) + arccos F(ρ₂,ρ₃) + 1e-9 on 1000 triples");
    let angle =
        |a: &DensityOperator, b: &DensityOperator| fidelity(a, b).map(|f| f.clamp(0.0, 1.0).acos());
    for _ in 0..1000 {
        let (a, b, c) = (
            random_state(2, &mut rng),
            random_state(2, &mut rng),
            random_state(2, &mut rng),
        );
        worst.record(t, angle(&a, &b)? + angle(&b, &c)? + 1e-9 - angle(&a, &c)?);
    }
    worst.finish(t);
    Ok(())
}

fn random_psd(d: usize, rng: &mut ChaCha8Rng) -> HermitianOperator {
    // Spread the scale over a few orders of magnitude, and make some
    // inputs rank deficient.
    let rank = rng.random_range(1..=d);
    let g = crate::operators::random_ginibre(d, rank, rng);
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    HermitianOperator::from_matrix_unchecked((&g * g.adjoint()).map(|z| z * scale))
}

fn operator_monotone(_: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut worst =
        Worst::new("‖A^α − B^α‖ ≤ ‖A − B‖^α + 1e-9 on 500 PSD pairs × α ∈ {0.25, 0.5, 0.75}");
    for trial in 0..500 {
        let d = 2 + trial % 3;
        let (a, b) = (random_psd(d, &mut rng), random_psd(d, &mut rng));
        let diff = operator_norm(&a.try_sub(&b)?);
        for alpha in [0.25, 0.5, 0.75] {
            let lhs = operator_norm(&matrix_power(&a, alpha)?.try_sub(&matrix_power(&b, alpha)?)?);
            worst.record(t, diff.powf(alpha) + 1e-9 - lhs);
        }
    }
    worst.finish(t);
    Ok(())
}

/// Radius of the smallest ball containing the points, by enumerating the
/// balls spanned by every subset of at most four points.
pub fn enclosing_ball_radius(points: &[[f64; 3]]) -> f64 {
    type V = nalgebra::Vector3<f64>;
    let pts: Vec<V> = points.iter().map(|p| V::new(p[0], p[1], p[2])).collect();
    let contains = |c: &V, r: f64| pts.iter().all(|p| (p - c).norm() <= r + 1e-12);
    let mut best = f64::INFINITY;
    let mut consider = |c: V, r: f64| {
        if r < best && contains(&c, r) {
            best = r;
        }
    };
    let n = pts.len();
    for i in 0..n {
        consider(pts[i], 0.0);
        for j in i + 1..n {
            let c = (pts[i] + pts[j]) / 2.0;
            consider(c, (pts[i] - c).norm());
            for k in j + 1..n {
                let (u, v) = (pts[j] - pts[i], pts[k] - pts[i]);
                let g = nalgebra::Matrix2::new(u.dot(&u), u.dot(&v), u.dot(&v), v.dot(&v));
                if let Some(st) = g
                    .try_inverse()
                    .map(|gi| gi * nalgebra::Vector2::new(u.dot(&u) / 2.0, v.dot(&v) / 2.0))
                {
                    let c = pts[i] + u * st[0] + v * st[1];
                    consider(c, (pts[i] - c).norm());
                }
                for l in k + 1..n {
                    let w = pts[l] - pts[i];
                    let m = nalgebra::Matrix3::from_rows(&[
                        u.transpose(),
                        v.transpose(),
                        w.transpose(),
                    ]);
                    let rhs = V::new(u.dot(&u), v.dot(&v), w.dot(&w)) / 2.0;
                    if let Some(off) = m.try_inverse().map(|mi| mi * rhs) {
                        let c = pts[i] + off;
                        consider(c, (pts[i] - c).norm());
                    }
                }
            }
        }
    }
    best
}

fn chebyshev(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut worst = Worst::new("|δ(one-point, E) − Bloch ball radius| ≤ 1e-5 on 50 qubit families");
    for _ in 0..50 {
        let k = rng.random_range(2..=5);
        let e = random_family(2, k, &mut rng);
        let labels: Vec<String> = e.labels().map(str::to_string).collect();
        let one_point = StateFamily::constant(&labels, &DensityOperator::maximally_mixed(2))?;
        let v = deficiency_delta(&one_point, &e, opts)?.value;
        // ‖ρ − σ‖₁ = |r − s| for qubits, so the radius is geometric.
        let points = e.states().map(|s| s.bloch()).collect::<Result<Vec<_>>>()?;
        worst.record(t, 1e-5 - (v - enclosing_ball_radius(&points)).abs());
    }
    worst.finish(t);
    let e = poles();
    let one_point = StateFamily::constant(&["0", "1"], &DensityOperator::maximally_mixed(2))?;
    let v = deficiency_delta(&one_point, &e, opts)?.value;
    t.check((v - 1.0).abs() <= 1e-6);
    t.note(format!(
        "δ(one-point, {{|0⟩⟨0|, |1⟩⟨1|}}) = {v:.9} (expected 1)"
    ));
    Ok(())
}

fn solver_invariants(opts: &SolveOptions, t: &mut Tally) -> Result<()> {
    solver_with_audit(opts, &SolveAudit::new(), t)
}

fn solver_with_audit(base: &SolveOptions, audit: &SolveAudit, t: &mut Tally) -> Result<()> {
    let plain = base.detached();
    let mut fixtures_ok = Worst::new("analytic fixtures solved to 1e-7");
    for (p, want) in [
        (fixtures::scalar_bound_problem(), 3.0),
        (fixtures::diagonal_eigen_problem(), 1.0),
    ] {
        let sol = conic::solve(&p, &plain)?;
        let ok = sol.status == SolveStatus::Optimal;
        fixtures_ok.record(
            t,
            if ok {
                1e-7 - (sol.primal_value - want).abs()
            } else {
                -1.0
            },
        );
    }
    fixtures_ok.finish(t);

    let records = audit.records();
    let mut duality = Worst::new("weak duality p ≥ d − 1e-9 on audited solves");
    let mut determinism = 0usize;
    for rec in &records {
        duality.record(t, rec.primal_value - rec.dual_value + 1e-9);
        let again = conic::solve(&rec.problem, &rec.options)?;
        if t.check(again.fingerprint() == rec.fingerprint) {
            determinism += 1;
        }
    }
    duality.finish(t);
    t.note(format!(
        "determinism: {determinism}/{} audited solves reproduce bit for bit",
        records.len()
    ));
    Ok(())
}
