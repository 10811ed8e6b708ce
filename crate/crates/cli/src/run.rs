//! Runs one command on a parsed problem and builds the machine report.

use std::collections::BTreeMap;

use poisred::dgla::{
    audit_action, audit_crossed_module, audit_dgla, compute_d_and_invariance,
    crossed_module_to_dgla, dgla_to_crossed_module, ActionData, DglaError,
};
use poisred::liegroupoid::{
    mw_quotient_pair, verify_kxky, CrossedModuleGroups, LiftedAction, PairGroupoid, PairQuotient,
};
use poisred::reduction::{
    check_coisotropic, check_marsden_ratiu, check_stages_a1, check_stages_a2, quotient_context,
    ReductionOptions, ReductionReport,
};
use poisred::subman::{Sampling, SubmanifoldSpec, DEFAULT_SAMPLES, DEFAULT_SEED};
use poisred::verdict::overall;
use poisred::{GradedContext, GradedFunction, PoissonBivector, Verdict, VerdictEntry};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::problem::{Command, Problem, TheoremChoice};

/// Upper bound on numerical deviations in the groupoid checks.
pub const NUMERIC_TOLERANCE: f64 = 1e-8;
/// Upper bound on the calibration deviation of the pair-groupoid sign.
pub const CALIBRATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub degree_bound: Option<u32>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub theorem: Option<TheoremChoice>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("missing input: {0}")]
    Missing(String),
    #[error("{0}")]
    Engine(String),
}

/// A value a command computed that `[expect]` entries can refer to.
#[derive(Clone, Debug)]
pub enum Observed {
    Verdict(Verdict),
    Count(usize),
    Number(f64),
    Graded(GradedFunction),
}

impl Observed {
    fn text(&self) -> String {
        match self {
            Observed::Verdict(v) => v.to_string(),
            Observed::Count(n) => n.to_string(),
            Observed::Number(x) => format!("{x:e}"),
            Observed::Graded(f) => f.to_string(),
        }
    }

    /// Compares against the text of an expectation. Numbers accept a
    /// `<= bound` form.
    fn matches(&self, expected: &str) -> bool {
        let expected = expected.trim();
        match self {
            Observed::Verdict(v) => v.to_string() == expected,
            Observed::Count(n) => expected.parse::<usize>().is_ok_and(|e| e == *n),
            Observed::Number(x) => match expected.strip_prefix("<=") {
                Some(b) => b.trim().parse::<f64>().is_ok_and(|b| *x <= b),
                None => expected.parse::<f64>().is_ok_and(|e| e == *x),
            },
            Observed::Graded(f) => {
                GradedFunction::parse(expected, f.context()).is_ok_and(|e| &e == f)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExpectationResult {
    pub key: String,
    pub expected: String,
    pub observed: String,
    pub ok: bool,
}

/// Result of one command on one problem.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: Command,
    /// Conjunction of the audited conditions.
    pub verdict: Verdict,
    /// `verdict`, downgraded to FAIL when an expectation is not met.
    pub status: Verdict,
    pub conditions: Vec<(VerdictEntry, Option<&'static str>)>,
    pub observed: BTreeMap<String, Observed>,
    pub expectations: Vec<ExpectationResult>,
    pub report: Value,
    pub summary: Vec<String>,
}

pub fn exit_code(status: Verdict) -> u8 {
    match status {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Unknown => 3,
    }
}

/// Exit code for unreadable or inconsistent input.
pub const EXIT_INPUT_ERROR: u8 = 4;

struct Findings {
    conditions: Vec<(VerdictEntry, Option<&'static str>)>,
    body: Map<String, Value>,
    observed: BTreeMap<String, Observed>,
    summary: Vec<String>,
}

impl Findings {
    fn new() -> Self {
        Findings {
            conditions: Vec::new(),
            body: Map::new(),
            observed: BTreeMap::new(),
            summary: Vec::new(),
        }
    }

    fn push(&mut self, entry: VerdictEntry, role: Option<&'static str>) {
        self.observed.insert(
            format!("condition.{}", entry.id),
            Observed::Verdict(entry.verdict),
        );
        self.conditions.push((entry, role));
    }

    fn push_all(&mut self, entries: Vec<VerdictEntry>) {
        for e in entries {
            self.push(e, None);
        }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.body.insert(key.to_string(), value);
    }

    fn observe(&mut self, key: impl Into<String>, value: Observed) {
        self.observed.insert(key.into(), value);
    }
}

fn sampling(opts: &RunOptions) -> Sampling {
    Sampling {
        samples: opts.samples.unwrap_or(DEFAULT_SAMPLES),
        seed: opts.seed.unwrap_or(DEFAULT_SEED),
    }
}

fn condition_json(entry: &VerdictEntry, role: Option<&str>) -> Value {
    let mut m = Map::new();
    m.insert("id".into(), json!(entry.id));
    m.insert("verdict".into(), json!(entry.verdict.to_string()));
    if let Some(r) = role {
        m.insert("role".into(), json!(r));
    }
    if let Some(w) = &entry.witness {
        m.insert("witness".into(), json!(w));
    }
    Value::Object(m)
}

fn strings<T: ToString>(items: &[T]) -> Value {
    Value::Array(items.iter().map(|i| json!(i.to_string())).collect())
}

pub fn run(cmd: Command, problem: &Problem, opts: &RunOptions) -> Result<Outcome, RunError> {
    let mut f = Findings::new();
    match cmd {
        Command::Check => theorem_run(&mut f, problem, opts, false)?,
        Command::Reduce => theorem_run(&mut f, problem, opts, true)?,
        Command::DglaCheck => dgla_run(&mut f, problem)?,
        Command::ActVerify => act_run(&mut f, problem, opts)?,
        Command::MwQuotient => mw_run(&mut f, problem, opts)?,
    }
    let entries: Vec<VerdictEntry> = f
        .conditions
        .iter()
        .filter(|(_, role)| *role != Some("info"))
        .map(|(e, _)| e.clone())
        .collect();
    // A computation that could not finish counts as unknown, never as pass.
    let mut verdict = overall(&entries);
    if verdict == Verdict::Pass && f.body.get("reduction_error").is_some_and(|v| !v.is_null()) {
        verdict = Verdict::Unknown;
    }
    f.observe(
        format!("verdict.{}", cmd.name()),
        Observed::Verdict(verdict),
    );

    let expectations: Vec<ExpectationResult> = problem
        .expectations
        .iter()
        .filter_map(|x| {
            f.observed.get(&x.key).map(|o| ExpectationResult {
                key: x.key.clone(),
                expected: x.expected.clone(),
                observed: o.text(),
                ok: o.matches(&x.expected),
            })
        })
        .collect();
    let status = if expectations.iter().all(|x| x.ok) {
        verdict
    } else {
        Verdict::Fail
    };

    let mut report = Map::new();
    report.insert("tool".into(), json!("poisred"));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    report.insert("command".into(), json!(cmd.name()));
    report.insert("problem".into(), json!(problem.title));
    report.insert("status".into(), json!(status.to_string()));
    report.insert("verdict".into(), json!(verdict.to_string()));
    report.insert(
        "conditions".into(),
        Value::Array(
            f.conditions
                .iter()
                .map(|(e, r)| condition_json(e, *r))
                .collect(),
        ),
    );
    for (k, v) in std::mem::take(&mut f.body) {
        report.insert(k, v);
    }
    report.insert(
        "expectations".into(),
        Value::Array(
            expectations
                .iter()
                .map(|x| json!({"key": x.key, "expected": x.expected, "observed": x.observed, "ok": x.ok}))
                .collect(),
        ),
    );

    let mut summary = vec![format!("{}: {verdict}", cmd.name())];
    for (e, role) in &f.conditions {
        let tag = role.map(|r| format!(" ({r})")).unwrap_or_default();
        match &e.witness {
            Some(w) => summary.push(format!("  {:<24} {}{tag}  {w}", e.id, e.verdict)),
            None => summary.push(format!("  {:<24} {}{tag}", e.id, e.verdict)),
        }
    }
    summary.append(&mut f.summary);
    for x in expectations.iter().filter(|x| !x.ok) {
        summary.push(format!(
            "  expectation {} not met: expected {}, observed {}",
            x.key, x.expected, x.observed
        ));
    }

    Ok(Outcome {
        command: cmd,
        verdict,
        status,
        conditions: f.conditions,
        observed: f.observed,
        expectations,
        report: Value::Object(report),
        summary,
    })
}

fn require_context(problem: &Problem) -> Result<&GradedContext, RunError> {
    problem
        .context
        .as_ref()
        .ok_or_else(|| RunError::Missing("[variables] section".into()))
}

fn require_bivector(problem: &Problem) -> Result<&PoissonBivector, RunError> {
    problem
        .bivector
        .as_ref()
        .ok_or_else(|| RunError::Missing("[bivector] section".into()))
}

fn theorem_run(
    f: &mut Findings,
    problem: &Problem,
    opts: &RunOptions,
    reduce: bool,
) -> Result<(), RunError> {
    let ctx = require_context(problem)?;
    let c = problem
        .submanifold
        .clone()
        .unwrap_or_else(|| SubmanifoldSpec::ambient(ctx));
    let theorem = opts
        .theorem
        .or(problem.theorem)
        .unwrap_or(if problem.stage.is_some() {
            TheoremChoice::StagesA2
        } else {
            TheoremChoice::MarsdenRatiu
        });
    if theorem == TheoremChoice::Presymplectic {
        if reduce {
            return Err(RunError::Missing(
                "a reduction theorem; `presymplectic` only checks the constraints".into(),
            ));
        }
        presymplectic_run(f, &c, opts);
        return Ok(());
    }
    let pi = require_bivector(problem)?;
    if reduce && c.quotient_coords().is_none() {
        return Err(RunError::Missing("`quotient` in [submanifold]".into()));
    }
    let ropts = ReductionOptions {
        sampling: sampling(opts),
        degree_bound: opts.degree_bound.or(problem.degree_bound),
        normalizer_frame: problem.normalizer.clone(),
    };
    let stage = || {
        problem
            .stage
            .as_ref()
            .ok_or_else(|| RunError::Missing("[distribution.D] section for a stage theorem".into()))
    };
    let report = match theorem {
        TheoremChoice::Coisotropic => check_coisotropic(&c, pi, &ropts),
        TheoremChoice::MarsdenRatiu => check_marsden_ratiu(&c, pi, &ropts),
        TheoremChoice::StagesA1 => check_stages_a1(&c, stage()?, pi, &ropts),
        TheoremChoice::StagesA2 => check_stages_a2(&c, stage()?, pi, &ropts),
        TheoremChoice::Presymplectic => unreachable!("handled above"),
    }
    .map_err(|e| RunError::Engine(e.to_string()))?;
    f.set("theorem", json!(report.theorem.id()));
    record_reduction(f, &c, &report, reduce);
    Ok(())
}

/// Conditions and frames of a reduction report; `prefix` namespaces the
/// condition ids.
fn record_conditions(
    f: &mut Findings,
    report: &ReductionReport,
    prefix: &str,
) -> Map<String, Value> {
    for cond in &report.conditions {
        let mut entry = cond.entry.clone();
        entry.id = format!("{prefix}{}", entry.id);
        f.push(entry, Some(cond.role.id()));
    }
    let frames: Map<String, Value> = report
        .frames
        .iter()
        .map(|(name, fr)| (name.clone(), strings(fr)))
        .collect();
    let mut out = Map::new();
    out.insert("frames".into(), Value::Object(frames));
    out
}

fn record_reduction(f: &mut Findings, c: &SubmanifoldSpec, report: &ReductionReport, reduce: bool) {
    for (k, v) in record_conditions(f, report, "") {
        f.set(&k, v);
    }
    f.set("reduction_error", json!(report.reduction_error));
    if !reduce {
        return;
    }
    let reduced = match &report.reduced {
        Some(r) => {
            let coords = quotient_context(c)
                .map(|q| q.even().to_vec())
                .unwrap_or_default();
            f.observe("reduced", Observed::Graded(r.bivector.to_function()));
            f.observe("defect", Observed::Graded(r.jacobi_defect.clone()));
            f.observe("lift_degree", Observed::Count(r.lift_degree as usize));
            let mut lifts = Map::new();
            for (name, l) in &r.lifts {
                f.observe(
                    format!("lift.{name}"),
                    Observed::Graded(GradedFunction::from_poly(c.context(), l.clone())),
                );
                lifts.insert(name.clone(), json!(l.to_string()));
            }
            f.summary
                .push(format!("  reduced bivector: {}", r.bivector));
            if !r.jacobi_defect.is_zero() {
                f.summary
                    .push(format!("  jacobi defect [S, S]: {}", r.jacobi_defect));
            }
            json!({
                "coordinates": coords,
                "bivector": r.bivector.to_string(),
                "jacobi_defect": r.jacobi_defect.to_string(),
                "lifts": lifts,
                "lift_degree": r.lift_degree,
            })
        }
        None => Value::Null,
    };
    if let Some(e) = &report.reduction_error {
        f.summary.push(format!("  no reduced bivector: {e}"));
    }
    f.set("reduced", reduced);
}

fn presymplectic_run(f: &mut Findings, c: &SubmanifoldSpec, opts: &RunOptions) {
    let (entry, rank) = c.rank_verdict("presymplectic", sampling(opts));
    let constant = rank.sampled_min == rank.degree0_rank && rank.sampled_max == rank.degree0_rank;
    f.push(
        if constant {
            VerdictEntry::pass("degree0_const_rank")
        } else {
            VerdictEntry::unknown(
                "degree0_const_rank",
                format!(
                    "generic rank {} but sampled ranks {}..{}",
                    rank.degree0_rank, rank.sampled_min, rank.sampled_max
                ),
            )
        },
        None,
    );
    f.push(
        match &rank.gamma_witness {
            Some(w) => VerdictEntry::fail("F_involutive", w.clone()),
            None => VerdictEntry::pass("F_involutive"),
        },
        None,
    );
    f.push(entry, None);
    f.set("theorem", json!("presymplectic"));
    f.set("degree0_rank", json!(rank.degree0_rank));
    f.set("sampled_rank", json!([rank.sampled_min, rank.sampled_max]));
    f.set("f_dim", json!(rank.f_dim));
    f.set(
        "bracket_matrix",
        Value::Array(rank.full_matrix.iter().map(|row| strings(row)).collect()),
    );
    f.observe("degree0_rank", Observed::Count(rank.degree0_rank));
    f.observe("f_dim", Observed::Count(rank.f_dim));
    f.summary.push(format!(
        "  degree-0 rank {}, dim F = {}",
        rank.degree0_rank, rank.f_dim
    ));
}

fn dgla_error(e: DglaError) -> RunError {
    RunError::Engine(e.to_string())
}

fn dgla_run(f: &mut Findings, problem: &Problem) -> Result<(), RunError> {
    let spec = problem
        .dgla
        .as_ref()
        .ok_or_else(|| RunError::Missing("[dgla] section".into()))?;
    f.set("dim_g", json!(spec.dim_g));
    f.set("dim_h", json!(spec.dim_h));
    let axioms = audit_dgla(spec);
    let axioms_hold = overall(&axioms) == Verdict::Pass;
    f.push_all(axioms);
    if axioms_hold {
        let cm = dgla_to_crossed_module(spec).map_err(dgla_error)?;
        f.push_all(audit_crossed_module(&cm));
        let back = crossed_module_to_dgla(&cm).map_err(dgla_error)?;
        f.push(
            if &back == spec {
                VerdictEntry::pass("round_trip")
            } else {
                VerdictEntry::fail("round_trip", "crossed module does not return the same DGLA")
            },
            None,
        );
    }
    if let Some(action) = &problem.action {
        let data = action_data(problem, action)?;
        f.push_all(audit_action(&data, spec).map_err(dgla_error)?);
        if spec.dim_h > 0 {
            match compute_d_and_invariance(&data, Sampling::default()) {
                Ok(d) => {
                    f.set("D_generators", strings(&d.generators));
                    f.push_all(d.verdicts);
                }
                Err(DglaError::NotSubmersion(at)) => f.push(
                    VerdictEntry::fail("J0_submersion", format!("rank drops at ({at})")),
                    None,
                ),
                Err(e) => return Err(dgla_error(e)),
            }
        }
    }
    Ok(())
}

fn action_data(
    problem: &Problem,
    action: &crate::problem::ActionInput,
) -> Result<ActionData, RunError> {
    Ok(ActionData {
        pi: require_bivector(problem)?.clone(),
        j0: action.j0.clone(),
        j1: action.j1.clone(),
    })
}

fn lifted_action(
    f: &mut Findings,
    problem: &Problem,
    opts: &RunOptions,
) -> Result<LiftedAction, RunError> {
    let spec = problem
        .dgla
        .as_ref()
        .ok_or_else(|| RunError::Missing("[dgla] section".into()))?;
    let action = problem
        .action
        .as_ref()
        .ok_or_else(|| RunError::Missing("[action] section".into()))?;
    let data = action_data(problem, action)?;
    let engine = |e: poisred::liegroupoid::GroupoidError| RunError::Engine(e.to_string());
    let groups = CrossedModuleGroups::vector_groups(spec).map_err(engine)?;
    let seed = opts.seed.unwrap_or(problem.pair.seed);
    let (pair, cal) = PairGroupoid::calibrated(&data.pi, problem.pair.calibration_samples, seed)
        .map_err(engine)?;
    f.push(
        if cal.deviation <= CALIBRATION_TOLERANCE {
            VerdictEntry::pass("calibration")
        } else {
            VerdictEntry::fail(
                "calibration",
                format!("best lift deviation {:e}", cal.deviation),
            )
        },
        None,
    );
    f.set(
        "calibration",
        json!({
            "target_sign": cal.target_sign,
            "deviation": cal.deviation,
            "rejected_deviation": cal.rejected_deviation,
        }),
    );
    f.set("pair_bivector", json!(pair.bivector.to_string()));
    f.observe("target_sign", Observed::Number(cal.target_sign as f64));
    f.observe("calibration_deviation", Observed::Number(cal.deviation));
    LiftedAction::new(data, groups, pair).map_err(engine)
}

fn act_run(f: &mut Findings, problem: &Problem, opts: &RunOptions) -> Result<(), RunError> {
    let action = lifted_action(f, problem, opts)?;
    let engine = |e: poisred::liegroupoid::GroupoidError| RunError::Engine(e.to_string());
    let samples = opts.samples.unwrap_or(problem.pair.samples);
    let seed = opts.seed.unwrap_or(problem.pair.seed);
    f.push_all(action.groups.audit(samples.min(50), seed));

    let moment = action.moment_map().map_err(engine)?;
    let dev = action
        .moment_deviation(samples.min(20), seed)
        .map_err(engine)?;
    f.push(
        if dev <= NUMERIC_TOLERANCE {
            VerdictEntry::pass("moment_map")
        } else {
            VerdictEntry::fail("moment_map", format!("deviation {dev:e}"))
        },
        None,
    );
    let pair_ctx = action.pair.context.clone();
    for (k, m) in moment.iter().enumerate() {
        f.observe(
            format!("moment_map.{}", k + 1),
            Observed::Graded(GradedFunction::from_poly(&pair_ctx, m.clone())),
        );
    }
    f.set("moment_map", strings(&moment));
    f.set("moment_deviation", json!(dev));

    let stats = verify_kxky(&action, samples, seed).map_err(engine)?;
    f.push(
        if stats.misclassified == 0 {
            VerdictEntry::pass("kxky_composability")
        } else {
            VerdictEntry::fail(
                "kxky_composability",
                format!(
                    "{} of {} samples misclassified",
                    stats.misclassified, stats.samples
                ),
            )
        },
        None,
    );
    f.push(
        if stats.max_deviation <= NUMERIC_TOLERANCE {
            VerdictEntry::pass("kxky_compatibility")
        } else {
            VerdictEntry::fail(
                "kxky_compatibility",
                format!("deviation {:e}", stats.max_deviation),
            )
        },
        None,
    );
    f.push(
        if stats.target_deviation <= NUMERIC_TOLERANCE {
            VerdictEntry::pass("target_law")
        } else {
            VerdictEntry::fail(
                "target_law",
                format!("deviation {:e}", stats.target_deviation),
            )
        },
        None,
    );
    f.set(
        "kxky",
        json!({
            "seed": stats.seed,
            "samples": stats.samples,
            "composable": stats.composable,
            "misclassified": stats.misclassified,
            "max_deviation": stats.max_deviation,
            "target_deviation": stats.target_deviation,
        }),
    );
    f.observe("misclassified", Observed::Count(stats.misclassified));
    f.observe("composable", Observed::Count(stats.composable));
    f.observe("max_deviation", Observed::Number(stats.max_deviation));
    f.summary.push(format!(
        "  k x . k y over {} samples: {} composable, {} misclassified, max deviation {:.1e}",
        stats.samples, stats.composable, stats.misclassified, stats.max_deviation
    ));
    Ok(())
}

fn quotient_json(f: &mut Findings, q: &PairQuotient, label: &str) -> Value {
    let mut body = record_conditions(f, &q.report, &format!("{label}."));
    let mut entry = q.multiplicative.clone();
    entry.id = format!("{label}.{}", entry.id);
    f.push(entry, None);
    match &q.bivector {
        Some(b) => {
            f.observe(label, Observed::Graded(b.to_function()));
            f.summary.push(format!("  {label} quotient bivector: {b}"));
        }
        None => f.push(
            VerdictEntry::unknown(
                &format!("{label}.reduced"),
                q.report
                    .reduction_error
                    .clone()
                    .unwrap_or_else(|| "no reduced bivector".into()),
            ),
            None,
        ),
    }
    {
        let m = &mut body;
        m.insert(
            "coordinates".into(),
            Value::Array(
                q.coordinates
                    .iter()
                    .map(|(n, p)| json!({"name": n, "function": p.to_string()}))
                    .collect(),
            ),
        );
        m.insert("constraints".into(), strings(&q.constraints));
        m.insert("theorem".into(), json!(q.report.theorem.id()));
        m.insert(
            "bivector".into(),
            json!(q.bivector.as_ref().map(|b| b.to_string())),
        );
    }
    Value::Object(body)
}

fn mw_run(f: &mut Findings, problem: &Problem, opts: &RunOptions) -> Result<(), RunError> {
    let action = lifted_action(f, problem, opts)?;
    let q = mw_quotient_pair(&action).map_err(|e| RunError::Engine(e.to_string()))?;
    f.set("moment_map", strings(&q.moment_map));
    let mw = quotient_json(f, &q.marsden_weinstein, "mw");
    let global = quotient_json(f, &q.global, "global");
    f.set("marsden_weinstein", mw);
    f.set("global", global);
    Ok(())
}
