//! The `.poisred` problem-file format.
//!
//! INI-like: `[section]` headers, `key = value` lines and `#` comments.
//! List-valued keys (`gen`, `j0`, `j1`, `gg`, `gh`, `delta`, `normalizer`,
//! `extra`) may repeat. Every value that holds an expression is parsed in the
//! coordinates declared under `[variables]`, and parse errors point at the
//! line and column of the offending character.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use poisred::dgla::{zero_constants, DGLASpec};
use poisred::reduction::Stage;
use poisred::subman::{DistributionSpec, SubmanError, SubmanifoldSpec};
use poisred::{
    int, GradedContext, GradedError, GradedFunction, PoissonBivector, PolyError, Polynomial,
    Rational,
};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ProblemError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ProblemError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        ProblemError {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    /// 1-based column where the value starts.
    pub column: usize,
}

impl Entry {
    fn error(&self, message: impl Into<String>) -> ProblemError {
        ProblemError::at(self.line, self.column, message)
    }

    /// Maps an expression error to the position inside this value.
    fn graded_error(&self, err: GradedError) -> ProblemError {
        match err {
            GradedError::Poly(PolyError::Parse { column, message }) => {
                ProblemError::at(self.line, self.column + column - 1, message)
            }
            other => self.error(other.to_string()),
        }
    }

    fn graded(&self, ctx: &GradedContext) -> Result<GradedFunction, ProblemError> {
        GradedFunction::parse(&self.value, ctx).map_err(|e| self.graded_error(e))
    }

    fn graded_of_degree(
        &self,
        ctx: &GradedContext,
        degree: usize,
    ) -> Result<GradedFunction, ProblemError> {
        let f = self.graded(ctx)?;
        f.expect_degree(degree)
            .map_err(|e| self.error(format!("`{}`: {e}", self.value)))?;
        Ok(f)
    }

    fn polynomial(&self, ctx: &GradedContext) -> Result<Polynomial, ProblemError> {
        Ok(self.graded_of_degree(ctx, 0)?.body())
    }

    fn number<T: FromStr>(&self) -> Result<T, ProblemError> {
        self.value
            .parse()
            .map_err(|_| self.error(format!("`{}` is not a valid number", self.value)))
    }

    fn list(&self) -> Vec<&str> {
        self.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    fn error(&self, message: impl Into<String>) -> ProblemError {
        ProblemError::at(self.line, 1, message)
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    pub fn single<'a>(&'a self, key: &'a str) -> Result<Option<&'a Entry>, ProblemError> {
        let mut it = self.all(key);
        let first = it.next();
        if let Some(dup) = it.next() {
            return Err(dup.error(format!("`{key}` given twice in [{}]", self.name)));
        }
        Ok(first)
    }

    /// Entries `prefix.<name> = value`, in file order.
    fn prefixed<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a Entry)> + 'a {
        self.entries.iter().filter_map(move |e| {
            e.key
                .strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('.'))
                .map(|name| (name, e))
        })
    }

    fn check_keys(&self, allowed: &[&str], prefixes: &[&str]) -> Result<(), ProblemError> {
        for e in &self.entries {
            let ok = allowed.contains(&e.key.as_str())
                || prefixes
                    .iter()
                    .any(|p| e.key.strip_prefix(p).is_some_and(|r| r.starts_with('.')));
            if !ok {
                return Err(ProblemError::at(
                    e.line,
                    1,
                    format!("unknown key `{}` in [{}]", e.key, self.name),
                ));
            }
        }
        Ok(())
    }
}

const SECTIONS: &[&str] = &[
    "meta",
    "variables",
    "bivector",
    "submanifold",
    "distribution.E",
    "distribution.D",
    "stage.A",
    "reduction",
    "dgla",
    "action",
    "pairgroupoid",
    "expect",
];

/// Splits the file into sections without interpreting values.
pub fn parse_sections(src: &str) -> Result<Vec<Section>, ProblemError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("");
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ProblemError::at(line, 1, "section header is missing `]`"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ProblemError::at(
                    line,
                    2,
                    format!("unknown section [{name}]"),
                ));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(ProblemError::at(
                    line,
                    2,
                    format!("section [{name}] appears twice"),
                ));
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let eq = text
            .find('=')
            .ok_or_else(|| ProblemError::at(line, 1, "expected `key = value`"))?;
        let key = text[..eq].trim();
        if key.is_empty() {
            return Err(ProblemError::at(line, 1, "empty key"));
        }
        let after = &text[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let column = text[..eq + 1 + lead].chars().count() + 1;
        let section = sections
            .last_mut()
            .ok_or_else(|| ProblemError::at(line, 1, "key outside of any section"))?;
        section.entries.push(Entry {
            key: key.to_string(),
            value: after.trim().to_string(),
            line,
            column,
        });
    }
    Ok(sections)
}

/// Subcommands that operate on a problem file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Check,
    Reduce,
    DglaCheck,
    ActVerify,
    MwQuotient,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Reduce => "reduce",
            Command::DglaCheck => "dgla-check",
            Command::ActVerify => "act-verify",
            Command::MwQuotient => "mw-quotient",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Command::Check,
            Command::Reduce,
            Command::DglaCheck,
            Command::ActVerify,
            Command::MwQuotient,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoremChoice {
    Coisotropic,
    MarsdenRatiu,
    StagesA1,
    StagesA2,
    Presymplectic,
}

impl TheoremChoice {
    pub fn name(self) -> &'static str {
        match self {
            TheoremChoice::Coisotropic => "coisotropic",
            TheoremChoice::MarsdenRatiu => "marsden-ratiu",
            TheoremChoice::StagesA1 => "a1",
            TheoremChoice::StagesA2 => "a2",
            TheoremChoice::Presymplectic => "presymplectic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            TheoremChoice::Coisotropic,
            TheoremChoice::MarsdenRatiu,
            TheoremChoice::StagesA1,
            TheoremChoice::StagesA2,
            TheoremChoice::Presymplectic,
        ]
        .into_iter()
        .find(|t| t.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairSettings {
    pub samples: usize,
    pub seed: u64,
    pub calibration_samples: usize,
}

impl Default for PairSettings {
    fn default() -> Self {
        PairSettings {
            samples: 100,
            seed: 1,
            calibration_samples: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ActionInput {
    pub j0: Vec<Polynomial>,
    pub j1: Vec<GradedFunction>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expectation {
    pub key: String,
    pub expected: String,
    pub line: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Problem {
    pub title: Option<String>,
    /// Commands the `examples` runner applies to this file.
    pub commands: Vec<Command>,
    pub context: Option<GradedContext>,
    pub bivector: Option<PoissonBivector>,
    pub submanifold: Option<SubmanifoldSpec>,
    pub stage: Option<Stage>,
    pub theorem: Option<TheoremChoice>,
    pub degree_bound: Option<u32>,
    pub normalizer: Option<Vec<GradedFunction>>,
    pub dgla: Option<DGLASpec>,
    pub action: Option<ActionInput>,
    pub pair: PairSettings,
    pub expectations: Vec<Expectation>,
}

fn check_name(e: &Entry, name: &str) -> Result<(), ProblemError> {
    let mut chars = name.chars();
    let ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(e.error(format!("`{name}` is not a valid coordinate name")))
    }
}

fn subman_error(section: &Section, err: SubmanError) -> ProblemError {
    section.error(format!("[{}]: {err}", section.name))
}

/// `i j k v` style rows with 1-based indices and a rational value last.
fn index_row(
    e: &Entry,
    arity: usize,
    bounds: &[usize],
) -> Result<(Vec<usize>, Rational), ProblemError> {
    let parts: Vec<&str> = e.value.split_whitespace().collect();
    if parts.len() != arity + 1 {
        return Err(e.error(format!(
            "expected {arity} indices and a value, found `{}`",
            e.value
        )));
    }
    let mut ix = Vec::with_capacity(arity);
    for (p, &bound) in parts[..arity].iter().zip(bounds) {
        let i: usize = p
            .parse()
            .map_err(|_| e.error(format!("`{p}` is not an index")))?;
        if i == 0 || i > bound {
            return Err(e.error(format!("index {i} is outside 1..={bound}")));
        }
        ix.push(i - 1);
    }
    let v: Rational = parts[arity]
        .parse()
        .map_err(|_| e.error(format!("`{}` is not a rational number", parts[arity])))?;
    Ok((ix, v))
}

impl Problem {
    pub fn parse(src: &str) -> Result<Self, ProblemError> {
        let sections = parse_sections(src)?;
        let get = |name: &str| sections.iter().find(|s| s.name == name);
        let mut p = Problem::default();

        if let Some(meta) = get("meta") {
            meta.check_keys(&["title", "command"], &[])?;
            p.title = meta.single("title")?.map(|e| e.value.clone());
            if let Some(e) = meta.single("command")? {
                for name in e.list() {
                    let cmd = Command::from_name(name)
                        .ok_or_else(|| e.error(format!("unknown command `{name}`")))?;
                    p.commands.push(cmd);
                }
            }
        }

        if let Some(vars) = get("variables") {
            vars.check_keys(&["even", "odd"], &[])?;
            let even_e = vars
                .single("even")?
                .ok_or_else(|| vars.error("[variables] needs `even`"))?;
            let even: Vec<String> = even_e.list().into_iter().map(String::from).collect();
            if even.is_empty() {
                return Err(even_e.error("no even coordinates declared"));
            }
            let odd: Vec<String> = match vars.single("odd")? {
                Some(e) => {
                    let odd: Vec<String> = e.list().into_iter().map(String::from).collect();
                    if odd.len() != even.len() {
                        return Err(e.error(format!(
                            "{} odd names for {} even coordinates",
                            odd.len(),
                            even.len()
                        )));
                    }
                    for n in &odd {
                        check_name(e, n)?;
                    }
                    odd
                }
                None => (1..=even.len()).map(|i| format!("th{i}")).collect(),
            };
            for n in &even {
                check_name(even_e, n)?;
            }
            let mut seen = BTreeMap::new();
            for n in even.iter().chain(&odd) {
                if seen.insert(n.as_str(), ()).is_some() {
                    return Err(vars.error(format!("coordinate `{n}` declared twice")));
                }
            }
            p.context = Some(GradedContext::from_names(even, odd));
        }

        let context = p.context.clone();
        let needs_ctx = |s: &Section| -> Result<GradedContext, ProblemError> {
            context
                .clone()
                .ok_or_else(|| s.error(format!("[{}] needs [variables] first", s.name)))
        };

        if let Some(biv) = get("bivector") {
            biv.check_keys(&["S"], &[])?;
            let ctx = needs_ctx(biv)?;
            let e = biv
                .single("S")?
                .ok_or_else(|| biv.error("[bivector] needs `S`"))?;
            let s = e.graded_of_degree(&ctx, 2)?;
            p.bivector =
                Some(PoissonBivector::from_function(&s).map_err(|err| e.graded_error(err))?);
        }

        if let Some(sub) = get("submanifold") {
            sub.check_keys(&["quotient", "extra"], &["solve", "theta"])?;
            let ctx = needs_ctx(sub)?;
            let solved = solved_even(sub, &ctx)?;
            let mut thetas = BTreeMap::new();
            for (name, e) in sub.prefixed("theta") {
                let i = ctx.odd_index(name).ok_or_else(|| {
                    ProblemError::at(e.line, 1, format!("unknown odd coordinate `{name}`"))
                })?;
                thetas.insert(i, e.graded_of_degree(&ctx, 1)?);
            }
            if let Some(dist) = get("distribution.E") {
                dist.check_keys(&["gen"], &[])?;
                if !thetas.is_empty() {
                    return Err(
                        dist.error("E is given both by `theta.*` relations and by generators")
                    );
                }
                let gens = dist
                    .all("gen")
                    .map(|e| e.graded_of_degree(&ctx, 1))
                    .collect::<Result<Vec<_>, _>>()?;
                thetas = SubmanifoldSpec::theta_relations_from_generators(&ctx, &gens)
                    .map_err(|err| subman_error(dist, err))?;
            }
            let mut spec =
                SubmanifoldSpec::new(&ctx, solved, thetas).map_err(|err| subman_error(sub, err))?;
            let extra = sub
                .all("extra")
                .map(|e| e.graded_of_degree(&ctx, 1))
                .collect::<Result<Vec<_>, _>>()?;
            if !extra.is_empty() {
                spec = spec
                    .with_extra(extra)
                    .map_err(|err| subman_error(sub, err))?;
            }
            if let Some(e) = sub.single("quotient")? {
                let names = e.list();
                spec = spec
                    .with_quotient_names(&names)
                    .map_err(|err| e.error(err.to_string()))?;
            }
            p.submanifold = Some(spec);
        } else if let Some(dist) = get("distribution.E") {
            return Err(dist.error("[distribution.E] needs a [submanifold] section"));
        }

        let stage_a = get("stage.A");
        let dist_d = get("distribution.D");
        match (stage_a, dist_d) {
            (_, Some(d)) => {
                d.check_keys(&["gen"], &[])?;
                let ctx = needs_ctx(d)?;
                let gens = d
                    .all("gen")
                    .map(|e| e.graded_of_degree(&ctx, 1))
                    .collect::<Result<Vec<_>, _>>()?;
                let a = match stage_a {
                    Some(a) => {
                        a.check_keys(&[], &["solve"])?;
                        SubmanifoldSpec::new(&ctx, solved_even(a, &ctx)?, BTreeMap::new())
                            .map_err(|err| subman_error(a, err))?
                    }
                    None => SubmanifoldSpec::ambient(&ctx),
                };
                let d = DistributionSpec::new(gens).map_err(|err| subman_error(d, err))?;
                p.stage = Some(Stage { a, d });
            }
            (Some(a), None) => return Err(a.error("[stage.A] needs a [distribution.D] section")),
            (None, None) => {}
        }

        if let Some(red) = get("reduction") {
            red.check_keys(&["theorem", "degree_bound", "normalizer"], &[])?;
            if let Some(e) = red.single("theorem")? {
                p.theorem = Some(
                    TheoremChoice::from_name(&e.value)
                        .ok_or_else(|| e.error(format!("unknown theorem `{}`", e.value)))?,
                );
            }
            if let Some(e) = red.single("degree_bound")? {
                p.degree_bound = Some(e.number()?);
            }
            let ctx = needs_ctx(red)?;
            let frame = red
                .all("normalizer")
                .map(|e| e.graded_of_degree(&ctx, 1))
                .collect::<Result<Vec<_>, _>>()?;
            if !frame.is_empty() {
                p.normalizer = Some(frame);
            }
        }

        if let Some(dg) = get("dgla") {
            p.dgla = Some(parse_dgla(dg)?);
        }

        if let Some(act) = get("action") {
            act.check_keys(&["j0", "j1"], &[])?;
            let ctx = needs_ctx(act)?;
            let j0 = act
                .all("j0")
                .map(|e| e.polynomial(&ctx))
                .collect::<Result<Vec<_>, _>>()?;
            let j1 = act
                .all("j1")
                .map(|e| e.graded_of_degree(&ctx, 1))
                .collect::<Result<Vec<_>, _>>()?;
            p.action = Some(ActionInput { j0, j1 });
        }

        if let Some(pg) = get("pairgroupoid") {
            pg.check_keys(&["samples", "seed", "calibration_samples"], &[])?;
            if let Some(e) = pg.single("samples")? {
                p.pair.samples = e.number()?;
            }
            if let Some(e) = pg.single("seed")? {
                p.pair.seed = e.number()?;
            }
            if let Some(e) = pg.single("calibration_samples")? {
                p.pair.calibration_samples = e.number()?;
            }
        }

        if let Some(ex) = get("expect") {
            for e in &ex.entries {
                if p.expectations.iter().any(|x| x.key == e.key) {
                    return Err(ProblemError::at(
                        e.line,
                        1,
                        format!("expectation `{}` given twice", e.key),
                    ));
                }
                p.expectations.push(Expectation {
                    key: e.key.clone(),
                    expected: e.value.clone(),
                    line: e.line,
                });
            }
        }
        Ok(p)
    }
}

fn solved_even(
    section: &Section,
    ctx: &GradedContext,
) -> Result<BTreeMap<usize, Polynomial>, ProblemError> {
    let mut out = BTreeMap::new();
    for (name, e) in section.prefixed("solve") {
        let i = ctx.even_index(name).ok_or_else(|| {
            ProblemError::at(e.line, 1, format!("unknown even coordinate `{name}`"))
        })?;
        out.insert(i, e.polynomial(ctx)?);
    }
    Ok(out)
}

fn parse_dgla(dg: &Section) -> Result<DGLASpec, ProblemError> {
    dg.check_keys(&["dim_g", "dim_h", "gg", "gh", "delta"], &[])?;
    let dim = |key: &str| -> Result<usize, ProblemError> {
        match dg.single(key)? {
            Some(e) => e.number(),
            None => Ok(0),
        }
    };
    let (ng, nh) = (dim("dim_g")?, dim("dim_h")?);
    let mut gg = zero_constants(ng, ng, ng);
    for e in dg.all("gg") {
        let (ix, v) = index_row(e, 3, &[ng, ng, ng])?;
        if ix[0] == ix[1] {
            return Err(e.error("a bracket of a basis element with itself is zero"));
        }
        gg[ix[0]][ix[1]][ix[2]] += &v;
        gg[ix[1]][ix[0]][ix[2]] -= &v;
    }
    let mut gh = zero_constants(ng, nh, nh);
    for e in dg.all("gh") {
        let (ix, v) = index_row(e, 3, &[ng, nh, nh])?;
        gh[ix[0]][ix[1]][ix[2]] += &v;
    }
    let mut delta = vec![vec![int(0); nh]; ng];
    for e in dg.all("delta") {
        let (ix, v) = index_row(e, 2, &[nh, ng])?;
        delta[ix[1]][ix[0]] += &v;
    }
    DGLASpec::new(gg, gh, delta).map_err(|err| dg.error(err.to_string()))
}
