//! Scenario configuration: the JSON document read by every `qdef` command,
//! and its validation into library objects.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::channels::Channel;
use crate::classical::{ClassicalFamily, ProbabilityVector, StochasticMatrix};
use crate::deficiency::StateFamily;
use crate::divergences::{DivergenceKind, DivergenceSpec};
use crate::error::{Error, Result};
use crate::markov::{step_seed, ChainScenario, ChannelSource, DEFAULT_LIMIT_TOL, DEFAULT_WINDOW};
use crate::operators::{c, CMatrix, DensityOperator, HermitianOperator};

/// Default tolerance for the ergodicity tests.
pub const DEFAULT_ERGODICITY_TOL: f64 = 1e-6;
/// Default largest label subset in the classical weak-topology check.
pub const DEFAULT_SUBSET_SIZE: usize = 3;

/// Top-level scenario document.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dim: usize,
    /// Probability vectors and stochastic matrices instead of density
    /// matrices and channels.
    #[serde(default)]
    pub classical: bool,
    pub family: Vec<MemberConfig>,
    /// Second family, for the `deficiency` command.
    #[serde(default)]
    pub target: Option<Vec<MemberConfig>>,
    #[serde(default)]
    pub chain: Option<ChainConfig>,
    #[serde(default)]
    pub analyses: AnalysesConfig,
}

/// A labelled family member: exactly one of `state`, `ket` or `probs`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    pub label: String,
    #[serde(default)]
    pub state: Option<MatrixConfig>,
    #[serde(default)]
    pub ket: Option<VectorConfig>,
    #[serde(default)]
    pub probs: Option<Vec<f64>>,
}

/// Row-major real and (optional) imaginary parts.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorConfig {
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    Identity,
    Depolarizing {
        p: f64,
    },
    Dephasing {
        lambda: f64,
    },
    AmplitudeDamping {
        gamma: f64,
    },
    Unitary {
        u: MatrixConfig,
    },
    /// Replace every input by `state` (quantum) or `probs` (classical).
    Constant {
        #[serde(default)]
        state: Option<MatrixConfig>,
        #[serde(default)]
        probs: Option<Vec<f64>>,
    },
    /// Column-stochastic `matrix[y][x] = P(y | x)`.
    Classical {
        matrix: Vec<Vec<f64>>,
    },
    Kraus {
        operators: Vec<MatrixConfig>,
    },
    /// Choi matrix with the input factor first.
    Choi {
        choi: MatrixConfig,
    },
    Random {
        seed: u64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainConfig {
    Homogeneous {
        channel: ChannelConfig,
        horizon: usize,
    },
    Explicit {
        channels: Vec<ChannelConfig>,
        #[serde(default)]
        horizon: Option<usize>,
    },
    /// Independent random channels with per-step seeds derived from `seed`.
    Random { seed: u64, horizon: usize },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysesConfig {
    #[serde(default)]
    pub limit: LimitConfig,
    #[serde(default)]
    pub ergodicity: ErgodicityConfig,
    #[serde(default)]
    pub divergences: Vec<DivergenceConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_limit_tol")]
    pub tol: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            tol: DEFAULT_LIMIT_TOL,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicityConfig {
    #[serde(default = "default_ergodicity_tol")]
    pub tol: f64,
    #[serde(default = "default_subset_size")]
    pub subset_size: usize,
}

impl Default for ErgodicityConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_ERGODICITY_TOL,
            subset_size: DEFAULT_SUBSET_SIZE,
        }
    }
}

/// A divergence and the labels it is evaluated on.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceConfig {
    pub kind: String,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub base: Option<Box<DivergenceSpecConfig>>,
    pub labels: Vec<String>,
}

impl DivergenceConfig {
    pub fn spec(&self) -> DivergenceSpecConfig {
        DivergenceSpecConfig {
            kind: self.kind.clone(),
            alpha: self.alpha,
            weights: self.weights.clone(),
            base: self.base.clone(),
        }
    }
}

/// `{"kind": ..., "alpha": x, "weights": [[...]], "base": {...}}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSpecConfig {
    pub kind: String,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub base: Option<Box<DivergenceSpecConfig>>,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_limit_tol() -> f64 {
    DEFAULT_LIMIT_TOL
}
fn default_ergodicity_tol() -> f64 {
    DEFAULT_ERGODICITY_TOL
}
fn default_subset_size() -> usize {
    DEFAULT_SUBSET_SIZE
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("{what} must be finite")))
    }
}

fn unit_interval(x: f64, what: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&finite(x, what)?) {
        Ok(x)
    } else {
        Err(invalid(format!("{what} = {x} is outside [0, 1]")))
    }
}

impl MatrixConfig {
    /// General complex matrix of the given shape.
    fn complex(&self, rows: usize, cols: usize, what: &str) -> Result<CMatrix> {
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == rows && m.iter().all(|r| r.len() == cols);
        if !shape_ok(&self.re) || self.im.as_ref().is_some_and(|im| !shape_ok(im)) {
            return Err(invalid(format!("{what} must be {rows}x{cols}")));
        }
        let entries = self.re.iter().chain(self.im.iter().flatten()).flatten();
        if entries.clone().any(|x| !x.is_finite()) {
            return Err(invalid(format!("{what} has non-finite entries")));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            c(self.re[i][j], self.im.as_ref().map_or(0.0, |m| m[i][j]))
        }))
    }

    fn density(&self, d: usize, what: &str) -> Result<DensityOperator> {
        let m = self.complex(d, d, what)?;
        let h = HermitianOperator::new(m).map_err(|e| invalid(format!("{what}: {e}")))?;
        DensityOperator::new(h).map_err(|e| invalid(format!("{what}: {e}")))
    }
}

impl VectorConfig {
    fn pure_state(&self, d: usize, what: &str) -> Result<DensityOperator> {
        if self.re.len() != d || self.im.as_ref().is_some_and(|im| im.len() != d) {
            return Err(invalid(format!("{what} must have {d} entries")));
        }
        let v = nalgebra::DVector::from_fn(d, |i, _| {
            c(self.re[i], self.im.as_ref().map_or(0.0, |m| m[i]))
        });
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid(format!("{what} has non-finite entries")));
        }
        DensityOperator::pure(&v).map_err(|e| invalid(format!("{what}: {e}")))
    }
}

fn probability_vector(p: &[f64], n: usize, what: &str) -> Result<ProbabilityVector> {
    if p.len() != n {
        return Err(invalid(format!("{what} must have {n} entries")));
    }
    ProbabilityVector::new(p.to_vec()).map_err(|e| invalid(format!("{what}: {e}")))
}

fn stochastic(rows: &[Vec<f64>], n: usize, what: &str) -> Result<StochasticMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("{what} must be {n}x{n}")));
    }
    StochasticMatrix::from_rows(rows).map_err(|e| invalid(format!("{what}: {e}")))
}

/// The family as validated library objects.
#[derive(Clone, Debug)]
pub enum Family {
    Quantum(StateFamily),
    Classical(ClassicalFamily),
}

/// How each step's map is produced.
#[derive(Clone, Debug)]
pub enum Chain {
    Quantum(ChainScenario),
    Classical {
        initial: ClassicalFamily,
        matrices: Vec<StochasticMatrix>,
        homogeneous: Option<StochasticMatrix>,
    },
}

impl Chain {
    pub fn horizon(&self) -> usize {
        match self {
            Chain::Quantum(s) => s.horizon,
            Chain::Classical { matrices, .. } => matrices.len(),
        }
    }

    /// The same chain as a quantum process on diagonal states.
    pub fn to_quantum(&self) -> Result<ChainScenario> {
        match self {
            Chain::Quantum(s) => Ok(s.clone()),
            Chain::Classical {
                initial,
                matrices,
                homogeneous,
            } => {
                let source = match homogeneous {
                    Some(m) => ChannelSource::Homogeneous(m.to_channel()?),
                    None => ChannelSource::Explicit(
                        matrices
                            .iter()
                            .map(StochasticMatrix::to_channel)
                            .collect::<Result<_>>()?,
                    ),
                };
                ChainScenario::new(initial.to_quantum(), source, matrices.len())
            }
        }
    }

    /// The channel applied at every step, if the chain is homogeneous.
    pub fn homogeneous_channel(&self) -> Result<Option<Channel>> {
        match self {
            Chain::Quantum(s) => Ok(match &s.channels {
                ChannelSource::Homogeneous(ch) => Some(ch.clone()),
                _ => None,
            }),
            Chain::Classical { homogeneous, .. } => homogeneous
                .as_ref()
                .map(StochasticMatrix::to_channel)
                .transpose(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if cfg.dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let a = &cfg.analyses;
        if a.limit.window == 0 {
            return Err(invalid("analyses.limit.window must be positive"));
        }
        if !(a.limit.tol > 0.0) || !(a.ergodicity.tol > 0.0) {
            return Err(invalid("analysis tolerances must be positive"));
        }
        Ok(cfg)
    }

    pub fn family(&self) -> Result<Family> {
        self.members(&self.family, self.dim, "family")
    }

    /// The `target` family. Its dimension is read from its members, so it
    /// may differ from `dim`.
    pub fn target(&self) -> Result<Family> {
        let members = self
            .target
            .as_ref()
            .ok_or_else(|| invalid("this command needs a `target` family"))?;
        let first = members.first().ok_or_else(|| invalid("target is empty"))?;
        let d = match (&first.state, &first.ket, &first.probs) {
            (Some(m), _, _) => m.re.len(),
            (_, Some(v), _) => v.re.len(),
            (_, _, Some(p)) => p.len(),
            _ => self.dim,
        };
        self.members(members, d, "target")
    }

    fn members(&self, members: &[MemberConfig], d: usize, what: &str) -> Result<Family> {
        if members.is_empty() {
            return Err(invalid(format!("{what} is empty")));
        }
        let mut quantum = Vec::new();
        let mut classical = Vec::new();
        for m in members {
            let name = format!("{what}[{}]", m.label);
            match (&m.state, &m.ket, &m.probs, self.classical) {
                (Some(s), None, None, false) => {
                    quantum.push((m.label.clone(), s.density(d, &name)?))
                }
                (None, Some(k), None, false) => {
                    quantum.push((m.label.clone(), k.pure_state(d, &name)?))
                }
                (None, None, Some(p), true) => {
                    classical.push((m.label.clone(), probability_vector(p, d, &name)?))
                }
                (_, _, _, false) => {
                    return Err(invalid(format!(
                        "{name} needs exactly one of `state` or `ket`"
                    )))
                }
                (_, _, _, true) => return Err(invalid(format!("{name} needs `probs` only"))),
            }
        }
        let map = |e: Error| invalid(format!("{what}: {e}"));
        Ok(if self.classical {
            Family::Classical(ClassicalFamily::new(classical).map_err(map)?)
        } else {
            Family::Quantum(StateFamily::new(quantum).map_err(map)?)
        })
    }

    pub fn chain(&self) -> Result<Chain> {
        let chain = self
            .chain
            .as_ref()
            .ok_or_else(|| invalid("this command needs a `chain`"))?;
        let d = self.dim;
        match self.family()? {
            Family::Quantum(fam) => {
                let (source, horizon) = match chain {
                    ChainConfig::Homogeneous { channel, horizon } => (
                        ChannelSource::Homogeneous(quantum_channel(channel, d, "chain.channel")?),
                        *horizon,
                    ),
                    ChainConfig::Explicit { channels, horizon } => {
                        let list = channels
                            .iter()
                            .enumerate()
                            .map(|(i, ch)| quantum_channel(ch, d, &format!("chain.channels[{i}]")))
                            .collect::<Result<Vec<_>>>()?;
                        let n = horizon.unwrap_or(list.len());
                        (ChannelSource::Explicit(list), n)
                    }
                    ChainConfig::Random { seed, horizon } => {
                        (ChannelSource::Random { seed: *seed }, *horizon)
                    }
                };
                let s = ChainScenario::new(fam, source, horizon)
                    .map_err(|e| invalid(format!("chain: {e}")))?;
                Ok(Chain::Quantum(s))
            }
            Family::Classical(initial) => {
                let (matrices, homogeneous) = match chain {
                    ChainConfig::Homogeneous { channel, horizon } => {
                        let m = classical_matrix(channel, d, "chain.channel")?;
                        (vec![m.clone(); *horizon], Some(m))
                    }
                    ChainConfig::Explicit { channels, horizon } => {
                        let list = channels
                            .iter()
                            .enumerate()
                            .map(|(i, ch)| classical_matrix(ch, d, &format!("chain.channels[{i}]")))
                            .collect::<Result<Vec<_>>>()?;
                        let n = horizon.unwrap_or(list.len());
                        if n > list.len() {
                            return Err(invalid(format!(
                                "chain: horizon {n} exceeds the {} explicit channels",
                                list.len()
                            )));
                        }
                        (list[..n].to_vec(), None)
                    }
                    ChainConfig::Random { seed, horizon } => {
                        let list = (1..=*horizon)
                            .map(|i| {
                                let mut rng = ChaCha8Rng::seed_from_u64(step_seed(*seed, i));
                                StochasticMatrix::random(d, d, &mut rng)
                            })
                            .collect();
                        (list, None)
                    }
                };
                Ok(Chain::Classical {
                    initial,
                    matrices,
                    homogeneous,
                })
            }
        }
    }

    /// Divergence specs with their label tuples, checked against the family.
    pub fn divergences(&self) -> Result<Vec<(DivergenceSpec, Vec<String>)>> {
        let labels: Vec<&str> = self.family.iter().map(|m| m.label.as_str()).collect();
        self.analyses
            .divergences
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let what = format!("analyses.divergences[{i}]");
                let spec = DivergenceSpec::new(d.spec().kind(&what)?)
                    .map_err(|e| invalid(format!("{what}: {e}")))?;
                spec.check_arity(d.labels.len())
                    .map_err(|e| invalid(format!("{what}: wrong number of labels ({e})")))?;
                if let Some(l) = d.labels.iter().find(|l| !labels.contains(&l.as_str())) {
                    return Err(invalid(format!("{what}: unknown label `{l}`")));
                }
                Ok((spec, d.labels.clone()))
            })
            .collect()
    }
}

impl DivergenceSpecConfig {
    fn kind(&self, what: &str) -> Result<DivergenceKind> {
        let unexpected = |field: &str| {
            invalid(format!(
                "{what}: `{field}` does not apply to `{}`",
                self.kind
            ))
        };
        let base = || -> Result<Box<DivergenceKind>> {
            match &self.base {
                Some(b) => Ok(Box::new(b.kind(&format!("{what}.base"))?)),
                None => Ok(Box::new(DivergenceKind::TraceDistance)),
            }
        };
        let kind = match self.kind.as_str() {
            "trace_distance" | "one_minus_fidelity" => {
                if self.alpha.is_some() {
                    return Err(unexpected("alpha"));
                }
                if self.weights.is_some() {
                    return Err(unexpected("weights"));
                }
                if self.base.is_some() {
                    return Err(unexpected("base"));
                }
                if self.kind == "trace_distance" {
                    DivergenceKind::TraceDistance
                } else {
                    DivergenceKind::OneMinusFidelity
                }
            }
            "alpha" => {
                if self.weights.is_some() || self.base.is_some() {
                    return Err(unexpected("weights/base"));
                }
                let a = self
                    .alpha
                    .ok_or_else(|| invalid(format!("{what}: `alpha` is required")))?;
                DivergenceKind::Alpha(a)
            }
            "weighted_sum" => {
                if self.alpha.is_some() {
                    return Err(unexpected("alpha"));
                }
                let weights = self
                    .weights
                    .clone()
                    .ok_or_else(|| invalid(format!("{what}: `weights` is required")))?;
                DivergenceKind::WeightedSum {
                    weights,
                    base: base()?,
                }
            }
            "chebyshev" => {
                if self.alpha.is_some() || self.weights.is_some() {
                    return Err(unexpected("alpha/weights"));
                }
                DivergenceKind::Chebyshev { base: base()? }
            }
            other => {
                return Err(invalid(format!(
                    "{what}: unknown divergence kind `{other}`"
                )))
            }
        };
        Ok(kind)
    }
}

fn no_probs(probs: &Option<Vec<f64>>, what: &str) -> Result<()> {
    match probs {
        Some(_) => Err(invalid(format!(
            "{what}: `probs` is for classical scenarios"
        ))),
        None => Ok(()),
    }
}

/// Builds a `d`-dimensional quantum channel.
pub fn quantum_channel(cfg: &ChannelConfig, d: usize, what: &str) -> Result<Channel> {
    let wrap = |e: Error| invalid(format!("{what}: {e}"));
    let ch = match cfg {
        ChannelConfig::Identity => Channel::identity(d),
        ChannelConfig::Depolarizing { p } => {
            Channel::depolarizing(unit_interval(*p, "p")?, d).map_err(wrap)?
        }
        ChannelConfig::Dephasing { lambda } => {
            Channel::dephasing(unit_interval(*lambda, "lambda")?, d).map_err(wrap)?
        }
        ChannelConfig::AmplitudeDamping { gamma } => {
            if d != 2 {
                return Err(invalid(format!("{what}: amplitude damping needs dim 2")));
            }
            Channel::amplitude_damping(unit_interval(*gamma, "gamma")?).map_err(wrap)?
        }
        ChannelConfig::Unitary { u } => Channel::unitary(&u.complex(d, d, what)?).map_err(wrap)?,
        ChannelConfig::Constant { state, probs } => {
            no_probs(probs, what)?;
            let s = state
                .as_ref()
                .ok_or_else(|| invalid(format!("{what}: `state` is required")))?;
            Channel::constant(&s.density(d, what)?, d)
        }
        ChannelConfig::Classical { matrix } => {
            stochastic(matrix, d, what)?.to_channel().map_err(wrap)?
        }
        ChannelConfig::Kraus { operators } => {
            if operators.is_empty() {
                return Err(invalid(format!("{what}: no Kraus operators")));
            }
            let ops = operators
                .iter()
                .map(|k| k.complex(d, d, what))
                .collect::<Result<Vec<_>>>()?;
            Channel::from_kraus(&ops).map_err(wrap)?
        }
        ChannelConfig::Choi { choi } => {
            Channel::from_choi(choi.complex(d * d, d * d, what)?, d, d).map_err(wrap)?
        }
        ChannelConfig::Random { seed } => Channel::random(d, *seed),
    };
    Ok(ch)
}

/// Builds an `n`-state stochastic matrix; only the classical kinds apply.
pub fn classical_matrix(cfg: &ChannelConfig, n: usize, what: &str) -> Result<StochasticMatrix> {
    match cfg {
        ChannelConfig::Identity => Ok(StochasticMatrix::identity(n)),
        ChannelConfig::Classical { matrix } => stochastic(matrix, n, what),
        ChannelConfig::Constant {
            state: None,
            probs: Some(p),
        } => Ok(StochasticMatrix::rank_one(
            &probability_vector(p, n, what)?,
            n,
        )),
        ChannelConfig::Constant { .. } => Err(invalid(format!(
            "{what}: classical constants need `probs` only"
        ))),
        ChannelConfig::Depolarizing { p } => {
            // (1−p)·id + p·uniform
            let p = unit_interval(*p, "p")?;
            let m = DMatrix::from_fn(n, n, |i, j| {
                p / n as f64 + if i == j { 1.0 - p } else { 0.0 }
            });
            StochasticMatrix::new(m).map_err(|e| invalid(format!("{what}: {e}")))
        }
        ChannelConfig::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(StochasticMatrix::random(n, n, &mut rng))
        }
        _ => Err(invalid(format!(
            "{what}: channel kind is not available in classical scenarios"
        ))),
    }
}
