//! Turns a validated scenario into `trace.csv` and `summary.json` text.
//! Maps are ordered (serde_json's default `BTreeMap`) and floats are printed
//! in shortest round-trip form, so identical inputs give identical bytes.

use serde_json::{json, Map, Value};

use super::config::{Chain, Family, ScenarioConfig};
use crate::channels::Channel;
use crate::classical::{
    ergodicity_tests, evolve_classical, lp_deficiency, subset_convergence, ClassicalFamily,
    ProbabilityVector,
};
use crate::conic::{Residuals, SolveOptions};
use crate::deficiency::{deficiency_delta, DeficiencyResult, SolverReport, StateFamily};
use crate::divergences::evaluate;
use crate::error::{Error, Result};
use crate::markov::{
    estimate_limit_family, evolve, fixed_point_check, monotone_trace, weak_ergodicity_test,
    LimitEstimate, LimitMode, TraceConfig,
};

/// Tolerance of the fixed-point check `Δ(Γ(E_∞), E_∞)`.
pub const FIXED_POINT_TOL: f64 = 1e-5;
/// Version tag written as the first line of `trace.csv`.
pub const TRACE_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Ergodicity,
    Limit,
    Divergences,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ergodicity => "ergodicity",
            Command::Limit => "limit",
            Command::Divergences => "divergences",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub trace_csv: String,
    pub summary: String,
}

struct Row {
    step: usize,
    sup_pairwise_td: f64,
    delta_fw: Option<f64>,
    delta_bw: Option<f64>,
    divergences: Vec<f64>,
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, Value::from)
}

/// Shortest round-trip text; scientific notation outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn quantum_family_json(f: &StateFamily) -> Value {
    f.entries()
        .iter()
        .map(|(label, rho)| {
            let (re, im) = rho.as_hermitian().to_re_im();
            json!({ "label": label, "re": re, "im": im })
        })
        .collect()
}

fn classical_family_json(f: &ClassicalFamily) -> Value {
    f.entries()
        .iter()
        .map(|(label, p)| json!({ "label": label, "probs": p.as_slice() }))
        .collect()
}

/// Diagonal of each state, clipped at 0 and renormalized.
fn diagonal_family(f: &StateFamily) -> Result<ClassicalFamily> {
    let entries = f
        .entries()
        .iter()
        .map(|(label, rho)| {
            let diag: Vec<f64> = rho
                .matrix()
                .diagonal()
                .iter()
                .map(|z| z.re.max(0.0))
                .collect();
            let total: f64 = diag.iter().sum();
            let p = ProbabilityVector::new(diag.iter().map(|x| x / total).collect())?;
            Ok((label.clone(), p))
        })
        .collect::<Result<Vec<_>>>()?;
    ClassicalFamily::new(entries)
}

fn mode_json(mode: LimitMode) -> (Value, Value) {
    match mode {
        LimitMode::Converged => (json!("converged"), Value::Null),
        LimitMode::LimitCycle(p) => (json!("limit_cycle"), json!(p)),
        LimitMode::Undetermined => (json!("undetermined"), Value::Null),
    }
}

fn solver_json(r: &SolverReport) -> Value {
    json!({
        "status": format!("{:?}", r.status),
        "primal_value": r.primal_value,
        "dual_value": r.dual_value,
        "iterations": r.iterations,
        "residuals": residuals_json(&r.residuals),
    })
}

fn residuals_json(r: &Residuals) -> Value {
    json!({
        "primal_infeasibility": r.primal_infeasibility,
        "dual_infeasibility": r.dual_infeasibility,
        "relative_gap": r.relative_gap,
    })
}

fn choi_json(ch: &Channel) -> Value {
    let re: Vec<Vec<f64>> = ch
        .choi()
        .row_iter()
        .map(|r| r.iter().map(|z| z.re).collect())
        .collect();
    let im: Vec<Vec<f64>> = ch
        .choi()
        .row_iter()
        .map(|r| r.iter().map(|z| z.im).collect())
        .collect();
    json!({ "dim_in": ch.dim_in(), "dim_out": ch.dim_out(), "choi": { "re": re, "im": im } })
}

fn deficiency_json(direction: &str, r: &DeficiencyResult) -> Value {
    json!({
        "value": r.value,
        "direction": direction,
        "solver": solver_json(&r.solver_report),
        "residuals": residuals_json(&r.solver_report.residuals),
        "channel": r.optimal_channel.as_ref().map_or(Value::Null, choi_json),
        "warning": r.warning,
    })
}

/// Returns the one-line `{delta_fw, delta_bw, Delta}` JSON printed on
/// stdout and the detailed summary document.
///
/// `delta_fw = δ(family, target)`: how well `family` simulates `target`.
/// `delta_bw = δ(target, family)`.
pub fn deficiency_report(cfg: &ScenarioConfig, opts: &SolveOptions) -> Result<(String, String)> {
    let family = cfg.family()?;
    let target = cfg.target()?;
    let (fw, bw, detail) = match (&family, &target) {
        (Family::Quantum(e), Family::Quantum(f)) => {
            // Label agreement is a validation matter; check before solving.
            e.matched(f)
                .map_err(|err| Error::Config(format!("family vs target: {err}")))?;
            let fw = deficiency_delta(e, f, opts)?;
            let bw = deficiency_delta(f, e, opts)?;
            let detail = json!({
                "delta_fw": deficiency_json("fw", &fw),
                "delta_bw": deficiency_json("bw", &bw),
            });
            (fw.value, bw.value, detail)
        }
        (Family::Classical(e), Family::Classical(f)) => {
            e.matched(f)
                .map_err(|err| Error::Config(format!("family vs target: {err}")))?;
            let fw = lp_deficiency(e, f, opts)?;
            let bw = lp_deficiency(f, e, opts)?;
            let entry = |direction: &str, r: &crate::classical::LpDeficiency| {
                let rows: Vec<Vec<f64>> = r
                    .matrix
                    .matrix()
                    .row_iter()
                    .map(|row| row.iter().copied().collect())
                    .collect();
                json!({
                    "value": r.value,
                    "direction": direction,
                    "solver": solver_json(&r.solver_report),
                    "residuals": residuals_json(&r.solver_report.residuals),
                    "channel": { "matrix": rows },
                })
            };
            let detail = json!({ "delta_fw": entry("fw", &fw), "delta_bw": entry("bw", &bw) });
            (fw.value, bw.value, detail)
        }
        _ => unreachable!("one config has one kind"),
    };
    let delta = fw.max(bw);
    let short = json!({ "delta_fw": fw, "delta_bw": bw, "Delta": delta });
    let mut full = detail;
    full["command"] = json!("deficiency");
    full["Delta"] = json!(delta);
    full["classical"] = json!(cfg.classical);
    Ok((short.to_string(), pretty(&full)))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values are serializable");
    s.push('\n');
    s
}

struct Limit {
    estimate: Option<LimitEstimate>,
    quantum: Option<StateFamily>,
    classical: Option<ClassicalFamily>,
}

pub fn scenario_report(
    cfg: &ScenarioConfig,
    command: Command,
    tol_override: Option<f64>,
    opts: &SolveOptions,
) -> Result<ScenarioOutput> {
    let chain = cfg.chain()?;
    let divergences = cfg.divergences()?;
    let qs = chain.to_quantum()?;
    let mut limit_cfg = cfg.analyses.limit.clone();
    let mut erg_cfg = cfg.analyses.ergodicity.clone();
    if let Some(t) = tol_override {
        match command {
            Command::Limit => limit_cfg.tol = t,
            _ => erg_cfg.tol = t,
        }
    }

    // Limit family, used for the δ/Δ columns.
    let estimate = if qs.horizon >= 2 * limit_cfg.window {
        Some(estimate_limit_family(
            &qs,
            limit_cfg.window,
            limit_cfg.tol,
            opts,
        )?)
    } else {
        None
    };
    let determined = estimate
        .as_ref()
        .filter(|e| e.mode != LimitMode::Undetermined)
        .map(|e| e.family.clone());
    let limit = Limit {
        classical: match (&chain, &determined) {
            (Chain::Classical { .. }, Some(f)) => Some(diagonal_family(f)?),
            _ => None,
        },
        quantum: determined,
        estimate,
    };

    let (rows, labels) = trace_rows(&chain, &limit, &divergences, opts)?;
    let trace_csv = trace_csv(&rows, &labels)?;

    let mut summary = Map::new();
    summary.insert("command".into(), json!(command.name()));
    summary.insert("trace_schema".into(), json!(TRACE_SCHEMA));
    summary.insert(
        "scenario".into(),
        json!({
            "dim": cfg.dim,
            "classical": cfg.classical,
            "labels": cfg.family.iter().map(|m| m.label.clone()).collect::<Vec<_>>(),
            "horizon": chain.horizon(),
        }),
    );
    let last = rows.last().expect("step 0 is always present");
    summary.insert(
        "final".into(),
        json!({
            "step": last.step,
            "sup_pairwise_td": last.sup_pairwise_td,
            "delta_fw": opt(last.delta_fw),
            "delta_bw": opt(last.delta_bw),
            "Delta_to_limit": opt(last.delta_fw.zip(last.delta_bw).map(|(a, b)| a.max(b))),
        }),
    );
    summary.insert(
        "limit".into(),
        limit_json(&chain, &limit, &limit_cfg, opts)?,
    );
    if matches!(command, Command::Simulate | Command::Ergodicity) {
        summary.insert(
            "ergodicity".into(),
            ergodicity_json(&chain, &qs, &limit, &erg_cfg, opts)?,
        );
    }
    if matches!(command, Command::Simulate | Command::Divergences) {
        let items = divergences
            .iter()
            .zip(&labels)
            .map(|((spec, tuple), column)| {
                let t = monotone_trace(&qs, spec, tuple, limit.quantum.as_ref(), opts)?;
                Ok(json!({
                    "column": column,
                    "kind": spec.label(),
                    "labels": tuple,
                    "values": t.values,
                    "max_violation": t.max_violation,
                    "limit_value": opt(t.limit_value),
                    "limit_gap": opt(t.limit_gap),
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        summary.insert("divergences".into(), Value::Array(items));
    }
    Ok(ScenarioOutput {
        trace_csv,
        summary: pretty(&Value::Object(summary)),
    })
}

fn trace_rows(
    chain: &Chain,
    limit: &Limit,
    divergences: &[(crate::divergences::DivergenceSpec, Vec<String>)],
    opts: &SolveOptions,
) -> Result<(Vec<Row>, Vec<String>)> {
    let labels: Vec<String> = divergences
        .iter()
        .map(|(spec, tuple)| format!("{}[{}]", spec.label(), tuple.join(";")))
        .collect();
    match chain {
        Chain::Quantum(s) => {
            let config = TraceConfig {
                limit: limit.quantum.clone(),
                divergences: divergences.to_vec(),
            };
            let trace = evolve(s, &config, opts)?;
            let rows = trace
                .rows
                .into_iter()
                .map(|r| Row {
                    step: r.step,
                    sup_pairwise_td: r.sup_pairwise_td,
                    delta_fw: r.delta_fw,
                    delta_bw: r.delta_bw,
                    divergences: r.divergences,
                })
                .collect();
            Ok((rows, labels))
        }
        Chain::Classical {
            initial, matrices, ..
        } => {
            let trace = evolve_classical(initial, matrices, limit.classical.as_ref(), opts)?;
            let rows = trace
                .rows
                .iter()
                .zip(&trace.families)
                .map(|(r, fam)| {
                    let quantum = fam.to_quantum();
                    let divergences = divergences
                        .iter()
                        .map(|(spec, tuple)| {
                            let states = tuple
                                .iter()
                                .map(|l| quantum.get(l))
                                .collect::<Result<Vec<_>>>()?;
                            evaluate(spec, &states, opts)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Row {
                        step: r.step,
                        sup_pairwise_td: r.sup_pairwise_l1,
                        delta_fw: r.delta_fw,
                        delta_bw: r.delta_bw,
                        divergences,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((rows, labels))
        }
    }
}

fn trace_csv(rows: &[Row], labels: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "step".to_string(),
        "sup_pairwise_td".into(),
        "delta_fw".into(),
        "delta_bw".into(),
        "Delta_to_limit".into(),
    ];
    header.extend(labels.iter().cloned());
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut record = vec![
            r.step.to_string(),
            num(r.sup_pairwise_td),
            cell(r.delta_fw),
            cell(r.delta_bw),
            cell(r.delta_fw.zip(r.delta_bw).map(|(a, b)| a.max(b))),
        ];
        record.extend(r.divergences.iter().copied().map(num));
        w.write_record(&record).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let body = String::from_utf8(body).expect("csv output is UTF-8");
    Ok(format!("# schema={TRACE_SCHEMA}\n{body}"))
}

fn limit_json(
    chain: &Chain,
    limit: &Limit,
    cfg: &super::config::LimitConfig,
    opts: &SolveOptions,
) -> Result<Value> {
    let Some(est) = &limit.estimate else {
        return Ok(json!({
            "mode": "undetermined",
            "reason": format!("horizon {} is shorter than twice the window {}", chain.horizon(), cfg.window),
            "window": cfg.window,
            "tol": cfg.tol,
        }));
    };
    let (mode, period) = mode_json(est.mode);
    let family = match (&limit.classical, &limit.quantum) {
        (Some(c), _) => classical_family_json(c),
        (None, Some(q)) => quantum_family_json(q),
        (None, None) => Value::Null,
    };
    let fixed_point = match (chain.homogeneous_channel()?, &limit.quantum) {
        (Some(ch), Some(f)) if est.mode == LimitMode::Converged => {
            let r = fixed_point_check(&ch, f, FIXED_POINT_TOL, opts)?;
            json!({ "Delta": r.delta_value, "tol": FIXED_POINT_TOL, "pass": r.pass })
        }
        _ => Value::Null,
    };
    Ok(json!({
        "mode": mode,
        "period": period,
        "phase_step": est.phase_step,
        "collapsed": est.collapsed,
        "window": cfg.window,
        "tol": cfg.tol,
        "psd_clip": est.psd_clip,
        "sup_alpha": est.sup_alpha(),
        "cycle_Delta": opt(est.cycle_delta),
        "final_cauchy_residual": est.cauchy_residuals.last().copied(),
        "family": family,
        "fixed_point": fixed_point,
    }))
}

fn ergodicity_json(
    chain: &Chain,
    qs: &crate::markov::ChainScenario,
    limit: &Limit,
    cfg: &super::config::ErgodicityConfig,
    opts: &SolveOptions,
) -> Result<Value> {
    let report = weak_ergodicity_test(qs, cfg.tol, opts)?;
    let mut out = json!({
        "tol": cfg.tol,
        "ergodic_at": report.ergodic_at,
        "contraction": report.contraction,
        "chebyshev_radius": report.chebyshev_radius,
        "consistent": report.consistent,
    });
    if let Chain::Classical {
        initial, matrices, ..
    } = chain
    {
        let trace = evolve_classical(initial, matrices, None, opts)?;
        let tests = ergodicity_tests(&trace, cfg.tol);
        let per_pair: Map<String, Value> = tests
            .l1_weak_per_pair
            .iter()
            .map(|((a, b), s)| (format!("{a}|{b}"), json!(s)))
            .collect();
        out["l1_weak"] = json!(tests.weak);
        out["l1_weak_per_pair"] = Value::Object(per_pair);
        out["notions_agree"] = json!(tests.notions_agree());
        if let Some(lim) = &limit.classical {
            let sub = subset_convergence(&trace, lim, cfg.subset_size, cfg.tol, opts)?;
            let per_subset: Vec<Value> = sub
                .per_subset
                .iter()
                .map(|(labels, since)| json!({ "labels": labels, "since": since }))
                .collect();
            out["subset_convergence"] = json!({
                "max_size": cfg.subset_size,
                "converged": sub.converged,
                "per_subset": per_subset,
            });
        }
    }
    Ok(out)
}
