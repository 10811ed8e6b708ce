//! Reduction audits and reduced bivectors.
//!
//! Every hypothesis is checked on explicit frames along `C`. Functional
//! conditions such as bracket closure are replaced by their tensorial
//! equivalents: for `X` in a frame of the normalizer-and-ideal fields,
//! `(L_X pi)|_C` must lie in `E ∧ TM|_C`, which is exactly `{S, X} ∈ I`.
//!
//! Conditions carry a [`Role`]. Descent conditions decide whether `S`
//! induces a function on the quotient at all; the reduced bivector is
//! computed whenever they pass, even if a theorem-level condition fails, so
//! that a non-Poisson reduction shows up as a non-zero Jacobi defect.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::exactpoly::{Monomial, Polynomial, Rational};
use crate::gradedalg::{
    derived_bracket, jacobi_defect, schouten_bracket, GradedContext, GradedError, GradedFunction,
    PoissonBivector,
};
use crate::linalg::{self, PolyMatrix};
use crate::subman::{DistributionSpec, Sampling, SubmanError, SubmanifoldSpec};
use crate::verdict::{Verdict, VerdictEntry};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error(transparent)]
    Subman(#[from] SubmanError),
    #[error(transparent)]
    Graded(#[from] GradedError),
    #[error("no quotient coordinates declared")]
    NoQuotient,
    #[error("no lift of `{coord}` annihilating E along C up to degree {bound}")]
    LiftInfeasible { coord: String, bound: u32 },
    #[error("reduced bracket {{{left}, {right}}} = {value} depends on `{coord}`, which is not a quotient coordinate")]
    NonBasic {
        left: String,
        right: String,
        value: String,
        coord: String,
    },
    #[error(
        "restriction of S involves `{0}`, which is not a quotient direction; use the lift route"
    )]
    NotTangent(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Theorem {
    Coisotropic,
    MarsdenRatiu,
    StagesA1,
    StagesA2,
}

impl Theorem {
    pub fn id(self) -> &'static str {
        match self {
            Theorem::Coisotropic => "COISO",
            Theorem::MarsdenRatiu => "MARSDEN_RATIU",
            Theorem::StagesA1 => "A1",
            Theorem::StagesA2 => "A2",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Needed for `S` to descend to the quotient.
    Descent,
    /// A hypothesis of the theorem being applied.
    Theorem,
    /// Reported for reference; does not affect the overall verdict.
    Info,
}

impl Role {
    pub fn id(self) -> &'static str {
        match self {
            Role::Descent => "descent",
            Role::Theorem => "theorem",
            Role::Info => "info",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condition {
    pub entry: VerdictEntry,
    pub role: Role,
}

#[derive(Clone, Debug, Default)]
pub struct ReductionOptions {
    pub sampling: Sampling,
    /// Overrides the default lift degree bound.
    pub degree_bound: Option<u32>,
    /// Frame of normalizer-and-ideal fields; derived automatically if absent.
    pub normalizer_frame: Option<Vec<GradedFunction>>,
}

/// An enclosing submanifold `A ⊇ C` with a distribution `D` on it.
#[derive(Clone, Debug)]
pub struct Stage {
    pub a: SubmanifoldSpec,
    pub d: DistributionSpec,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedStructure {
    pub bivector: PoissonBivector,
    pub jacobi_defect: GradedFunction,
    /// Quotient coordinate name and its lift to a function on `M`.
    pub lifts: Vec<(String, Polynomial)>,
    pub lift_degree: u32,
}

#[derive(Clone, Debug)]
pub struct ReductionReport {
    pub theorem: Theorem,
    pub conditions: Vec<Condition>,
    /// Named frames used by tensorial checks, printed.
    pub frames: Vec<(String, Vec<String>)>,
    pub reduced: Option<ReducedStructure>,
    pub reduction_error: Option<String>,
}

impl ReductionReport {
    fn new(theorem: Theorem) -> Self {
        ReductionReport {
            theorem,
            conditions: Vec::new(),
            frames: Vec::new(),
            reduced: None,
            reduction_error: None,
        }
    }

    fn push(&mut self, entry: VerdictEntry, role: Role) {
        self.conditions.push(Condition { entry, role });
    }

    pub fn get(&self, id: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.entry.id == id)
    }

    pub fn verdict_of(&self, id: &str) -> Option<Verdict> {
        self.get(id).map(|c| c.entry.verdict)
    }

    pub fn descends(&self) -> Verdict {
        Verdict::all(
            self.conditions
                .iter()
                .filter(|c| c.role == Role::Descent)
                .map(|c| c.entry.verdict),
        )
    }

    /// Conjunction of every non-informational verdict.
    pub fn overall(&self) -> Verdict {
        let base = Verdict::all(
            self.conditions
                .iter()
                .filter(|c| c.role != Role::Info)
                .map(|c| c.entry.verdict),
        );
        if self.reduction_error.is_some() && base == Verdict::Pass {
            Verdict::Unknown
        } else {
            base
        }
    }
}

fn field_text(fields: &[GradedFunction]) -> Vec<String> {
    fields.iter().map(|f| f.to_string()).collect()
}

fn combine(
    coeffs: &[Polynomial],
    fields: &[GradedFunction],
    ctx: &GradedContext,
) -> GradedFunction {
    coeffs
        .iter()
        .zip(fields)
        .fold(GradedFunction::zero(ctx), |acc, (c, f)| {
            &acc + &f.mul_poly(c)
        })
}

/// `{S, X} ∈ I` for each field; the first failure is the witness.
fn lie_derivative_in_ideal(
    id: &str,
    c: &SubmanifoldSpec,
    s: &GradedFunction,
    frame: &[GradedFunction],
) -> VerdictEntry {
    for (k, x) in frame.iter().enumerate() {
        let b = schouten_bracket(s, x).expect("same context");
        let r = c.restrict(&b);
        if !r.is_zero() {
            return VerdictEntry::fail(
                id,
                format!(
                    "(L_X pi)|_C not in E^TM for X{k} = {x}: {{S, X}} = {} mod I",
                    -r
                ),
            );
        }
    }
    VerdictEntry::pass(id)
}

fn sharp_rows(c: &SubmanifoldSpec, pi: &PoissonBivector, forms: &[Vec<Polynomial>]) -> PolyMatrix {
    forms.iter().map(|f| c.field_row(&pi.sharp(f))).collect()
}

/// `E ⊆ TC`: every frame field annihilates the constraints on `C`.
fn e_sub_tc(c: &SubmanifoldSpec) -> VerdictEntry {
    let m = c.transversality_matrix();
    for (b, row) in m.iter().enumerate() {
        for (a, v) in row.iter().enumerate() {
            if !v.is_zero() {
                return VerdictEntry::fail("E_sub_TC", format!("e{b}(g{a}) = {v} on C"));
            }
        }
    }
    VerdictEntry::pass("E_sub_TC")
}

fn involutive(id: &str, c: &SubmanifoldSpec, frame: &[GradedFunction]) -> VerdictEntry {
    for (i, x) in frame.iter().enumerate() {
        for (j, y) in frame.iter().enumerate().skip(i + 1) {
            let r = c.restrict(&schouten_bracket(x, y).expect("same context"));
            if !r.is_zero() {
                return VerdictEntry::fail(id, format!("[{x}, {y}] = {r} mod I (frames {i}, {j})"));
            }
        }
    }
    VerdictEntry::pass(id)
}

fn f_rank_entries(c: &SubmanifoldSpec, sampling: Sampling) -> [VerdictEntry; 2] {
    let (_, report) = c.rank_verdict("F_const_rank", sampling);
    let m = c.transversality_matrix();
    let rank = c.rank_along(&m, sampling);
    let const_rank = if rank.is_constant() {
        VerdictEntry::pass("F_const_rank")
    } else {
        VerdictEntry::unknown(
            "F_const_rank",
            format!(
                "generic rank {} of e_b(g_a) drops to {} at a sampled point",
                rank.generic, rank.sampled_min
            ),
        )
    };
    let inv = match report.gamma_witness {
        Some(w) => VerdictEntry::fail("F_involutive", w),
        None => VerdictEntry::pass("F_involutive"),
    };
    [const_rank, inv]
}

/// `♯E° ⊆ TC`, exactly: `pi(eps_r, dg_a) = 0` on `C`.
fn sharp_eann_sub_tc(id: &str, c: &SubmanifoldSpec, pi: &PoissonBivector) -> VerdictEntry {
    for (r, eps) in c.e_annihilator().iter().enumerate() {
        for (a, nu) in c.conormal_forms().iter().enumerate() {
            let v = c.restrict_poly(&pi.contract_forms(eps, nu));
            if !v.is_zero() {
                return VerdictEntry::fail(id, format!("pi(eps{r}, dg{a}) = {v} on C"));
            }
        }
    }
    VerdictEntry::pass(id)
}

/// `♯N*C ⊆ E`: the Hamiltonian fields of the constraints lie in `E` on `C`.
fn sharp_nc_sub_e(id: &str, c: &SubmanifoldSpec, pi: &PoissonBivector) -> VerdictEntry {
    for (a, nu) in c.conormal_forms().iter().enumerate() {
        let r = c.restrict(&pi.sharp(nu));
        if !r.is_zero() {
            return VerdictEntry::fail(
                id,
                format!("#dg{a} = {} is not in E (residue {r})", pi.sharp(nu)),
            );
        }
    }
    VerdictEntry::pass(id)
}

fn condi1(c: &SubmanifoldSpec, pi: &PoissonBivector, sampling: Sampling) -> VerdictEntry {
    let sub = sharp_rows(c, pi, &c.e_annihilator());
    let mut sup: PolyMatrix = c.tc_frame().iter().map(|t| c.field_row(t)).collect();
    sup.extend(c.e_frame().iter().map(|e| c.field_row(e)));
    c.span_inclusion("condi1", &sub, &sup, sampling)
}

/// Frame of `N(I)_1 ∩ I_1`: each field `Y` of the `F` frame is corrected to
/// `Y + sum_a g_a W_a` so that its brackets with the `E` frame stay in `I`.
pub fn normalizer_frame(c: &SubmanifoldSpec) -> Result<Vec<GradedFunction>, String> {
    let ctx = c.context();
    let e = c.e_frame();
    let m = c.transversality_matrix();
    let gens = c.even_generators();
    let unsolved = c.unsolved_odd();
    let mut out = Vec::new();
    for (k, y) in c.f_frame().into_iter().enumerate() {
        let residues: Vec<GradedFunction> = e
            .iter()
            .map(|eb| c.restrict(&schouten_bracket(&y, eb).expect("same context")))
            .collect();
        let mut x = y.clone();
        if residues.iter().any(|r| !r.is_zero()) {
            if gens.is_empty() {
                return Err(format!(
                    "F frame field {k} = {y} does not normalize E and C has no constraints"
                ));
            }
            let mut w: Vec<GradedFunction> = vec![GradedFunction::zero(ctx); gens.len()];
            for &r in &unsolved {
                let rhs: Vec<Polynomial> =
                    residues.iter().map(|res| res.coefficient(1 << r)).collect();
                let sol =
                    linalg::poly_solve(&m, &rhs, ctx.even(), gens.len()).ok_or_else(|| {
                        format!("no polynomial normalizer correction for F frame field {k} = {y}")
                    })?;
                for (wa, s) in w.iter_mut().zip(sol) {
                    *wa = &*wa + &GradedFunction::term(ctx, 1 << r, s);
                }
            }
            for (g, wa) in gens.iter().zip(&w) {
                x = &x + &wa.mul_poly(g);
            }
        }
        out.push(x);
    }
    for x in &out {
        validate_normalizer_field(c, x)?;
    }
    Ok(out)
}

fn validate_normalizer_field(c: &SubmanifoldSpec, x: &GradedFunction) -> Result<(), String> {
    if x.expect_degree(1).is_err() {
        return Err(format!("{x} is not a vector field"));
    }
    if !c.in_ideal(x) {
        return Err(format!("{x} is not a section of E along C"));
    }
    for g in c.even_generators() {
        let v = GradedFunction::apply_vector_field(x, &g).expect("degree 1");
        if !c.restrict_poly(&v).is_zero() {
            return Err(format!("{x} is not tangent to C"));
        }
    }
    for eb in c.e_frame() {
        let r = c.restrict(&schouten_bracket(x, &eb).expect("same context"));
        if !r.is_zero() {
            return Err(format!("[{x}, {eb}] = {r} is not in E"));
        }
    }
    Ok(())
}

fn condi2(
    id: &str,
    c: &SubmanifoldSpec,
    pi: &PoissonBivector,
    opts: &ReductionOptions,
    report: &mut ReductionReport,
) -> VerdictEntry {
    let frame = match &opts.normalizer_frame {
        Some(user) => {
            if let Some(err) = user
                .iter()
                .find_map(|x| validate_normalizer_field(c, x).err())
            {
                return VerdictEntry::unknown(
                    id,
                    format!("supplied normalizer frame rejected: {err}"),
                );
            }
            user.clone()
        }
        None => match normalizer_frame(c) {
            Ok(f) => f,
            Err(why) => return VerdictEntry::unknown(id, why),
        },
    };
    report
        .frames
        .push(("normalizer".into(), field_text(&frame)));
    lie_derivative_in_ideal(id, c, &pi.to_function(), &frame)
}

pub fn check_coisotropic(
    c: &SubmanifoldSpec,
    pi: &PoissonBivector,
    opts: &ReductionOptions,
) -> Result<ReductionReport, ReductionError> {
    let mut report = ReductionReport::new(Theorem::Coisotropic);
    let e = c.e_frame();
    report.frames.push(("E".into(), field_text(&e)));
    report.push(e_sub_tc(c), Role::Descent);
    report.push(involutive("E_involutive", c, &e), Role::Descent);
    report.push(sharp_nc_sub_e("sharpNC_sub_E", c, pi), Role::Descent);
    report.push(
        lie_derivative_in_ideal("closure", c, &pi.to_function(), &e),
        Role::Descent,
    );
    finish(c, pi, opts, report)
}

pub fn check_marsden_ratiu(
    c: &SubmanifoldSpec,
    pi: &PoissonBivector,
    opts: &ReductionOptions,
) -> Result<ReductionReport, ReductionError> {
    let mut report = ReductionReport::new(Theorem::MarsdenRatiu);
    report.frames.push(("F".into(), field_text(&c.f_frame())));
    for entry in f_rank_entries(c, opts.sampling) {
        report.push(entry, Role::Descent);
    }
    report.push(sharp_eann_sub_tc("sharpEann_sub_TC", c, pi), Role::Theorem);
    report.push(condi1(c, pi, opts.sampling), Role::Descent);
    let entry = condi2("condi2", c, pi, opts, &mut report);
    report.push(entry, Role::Descent);
    report.push(sharp_nc_sub_e("halfnorm", c, pi), Role::Info);
    finish(c, pi, opts, report)
}

struct StageFrames {
    d: Vec<GradedFunction>,
    d_rows: PolyMatrix,
    tc_rows: PolyMatrix,
    e_rows: PolyMatrix,
    ta_rows: PolyMatrix,
}

fn stage_frames(c: &SubmanifoldSpec, stage: &Stage) -> StageFrames {
    let d = stage.d.generators.clone();
    StageFrames {
        d_rows: d.iter().map(|x| c.field_row(x)).collect(),
        tc_rows: c.tc_frame().iter().map(|x| c.field_row(x)).collect(),
        e_rows: c.e_frame().iter().map(|x| c.field_row(x)).collect(),
        ta_rows: stage.a.tc_frame().iter().map(|x| c.field_row(x)).collect(),
        d,
    }
}

fn c_sub_a(c: &SubmanifoldSpec, a: &SubmanifoldSpec) -> VerdictEntry {
    for g in a.even_generators() {
        let v = c.restrict_poly(&g);
        if !v.is_zero() {
            return VerdictEntry::fail("C_sub_A", format!("constraint {g} of A equals {v} on C"));
        }
    }
    VerdictEntry::pass("C_sub_A")
}

fn d_sub_e(c: &SubmanifoldSpec, d: &[GradedFunction]) -> VerdictEntry {
    for x in d {
        let r = c.restrict(x);
        if !r.is_zero() {
            return VerdictEntry::fail("D_sub_E", format!("{x} is not in E along C (residue {r})"));
        }
    }
    VerdictEntry::pass("D_sub_E")
}

fn d_sub_ta(a: &SubmanifoldSpec, d: &[GradedFunction]) -> VerdictEntry {
    for x in d {
        for g in a.even_generators() {
            let v = a.restrict_poly(&GradedFunction::apply_vector_field(x, &g).expect("degree 1"));
            if !v.is_zero() {
                return VerdictEntry::fail(
                    "D_sub_TA",
                    format!("{x} is not tangent to A: X({g}) = {v}"),
                );
            }
        }
    }
    VerdictEntry::pass("D_sub_TA")
}

/// Constant rank and involutivity of `D` on `A`.
fn d_involutive(a: &SubmanifoldSpec, d: &[GradedFunction], sampling: Sampling) -> VerdictEntry {
    let rows: PolyMatrix = d.iter().map(|x| a.field_row(x)).collect();
    let rank = a.rank_along(&rows, sampling);
    if !rank.is_constant() {
        return VerdictEntry::unknown(
            "D_involutive",
            format!(
                "rank of D on A varies ({}..{})",
                rank.sampled_min, rank.generic
            ),
        );
    }
    let mut brackets = Vec::new();
    for (i, x) in d.iter().enumerate() {
        for y in d.iter().skip(i + 1) {
            brackets.push(a.field_row(&schouten_bracket(x, y).expect("same context")));
        }
    }
    a.span_inclusion("D_involutive", &brackets, &rows, sampling)
}

/// Pointwise dimension of an intersection via `dim U + dim V - dim(U + V)`.
fn intersection_rank(
    id: &str,
    c: &SubmanifoldSpec,
    u: &[Vec<Polynomial>],
    v: &[Vec<Polynomial>],
    sampling: Sampling,
) -> VerdictEntry {
    let ru = c.rank_along(u, sampling);
    let rv = c.rank_along(v, sampling);
    let mut uv: PolyMatrix = u.to_vec();
    uv.extend(v.iter().cloned());
    let generic = ru.generic + rv.generic - linalg::poly_rank(&restrict_rows(c, &uv));
    for pt in c.sample_points(sampling) {
        let rank_at = |m: &[Vec<Polynomial>]| {
            linalg::rational_rank(&linalg::eval_matrix(&restrict_rows(c, m), &pt))
        };
        let dim = rank_at(u) + rank_at(v) - rank_at(&uv);
        if dim != generic {
            let coords: Vec<String> = pt.iter().map(Rational::to_string).collect();
            return VerdictEntry::unknown(
                id,
                format!(
                    "dimension {dim} at ({}) but {generic} generically",
                    coords.join(", ")
                ),
            );
        }
    }
    VerdictEntry::pass(id)
}

fn restrict_rows(c: &SubmanifoldSpec, m: &[Vec<Polynomial>]) -> PolyMatrix {
    m.iter()
        .map(|r| r.iter().map(|p| c.restrict_poly(p)).collect())
        .collect()
}

/// Flows of `D` fields tangent to `C` preserve `E ∩ TA|_C`.
fn prcond(
    c: &SubmanifoldSpec,
    stage: &Stage,
    frames: &StageFrames,
    report: &mut ReductionReport,
) -> VerdictEntry {
    let ctx = c.context();
    let c_gens = c.even_generators();
    let a_gens: Vec<Polynomial> = stage.a.even_generators();
    let tangency = |fields: &[GradedFunction], gens: &[Polynomial]| -> PolyMatrix {
        fields
            .iter()
            .map(|x| {
                gens.iter()
                    .map(|g| {
                        c.restrict_poly(
                            &GradedFunction::apply_vector_field(x, g).expect("degree 1"),
                        )
                    })
                    .collect()
            })
            .collect()
    };
    let frame_in = |fields: &[GradedFunction], gens: &[Polynomial]| -> Vec<GradedFunction> {
        if gens.is_empty() || fields.is_empty() {
            return fields.to_vec();
        }
        linalg::poly_left_kernel(&tangency(fields, gens), ctx.even())
            .iter()
            .map(|k| combine(k, fields, ctx))
            .collect()
    };
    let y_frame = frame_in(&frames.d, &c_gens);
    let z_frame = frame_in(&c.e_frame(), &a_gens);
    report
        .frames
        .push(("D_cap_TC".into(), field_text(&y_frame)));
    report
        .frames
        .push(("E_cap_TA".into(), field_text(&z_frame)));
    for y in &y_frame {
        for z in &z_frame {
            let b = schouten_bracket(y, z).expect("same context");
            let r = c.restrict(&b);
            if !r.is_zero() {
                return VerdictEntry::fail(
                    "prcond",
                    format!("[{y}, {z}] = {b} leaves E (residue {r})"),
                );
            }
            for g in &a_gens {
                let v =
                    c.restrict_poly(&GradedFunction::apply_vector_field(&b, g).expect("degree 1"));
                if !v.is_zero() {
                    return VerdictEntry::fail(
                        "prcond",
                        format!("[{y}, {z}] = {b} leaves TA: d({g}) gives {v}"),
                    );
                }
            }
        }
    }
    VerdictEntry::pass("prcond")
}

pub fn check_stages_a1(
    c: &SubmanifoldSpec,
    stage: &Stage,
    pi: &PoissonBivector,
    opts: &ReductionOptions,
) -> Result<ReductionReport, ReductionError> {
    let s = opts.sampling;
    let mut report = ReductionReport::new(Theorem::StagesA1);
    let fr = stage_frames(c, stage);
    report.frames.push(("F".into(), field_text(&c.f_frame())));
    report.frames.push(("D".into(), field_text(&fr.d)));
    for entry in f_rank_entries(c, s) {
        report.push(entry, Role::Descent);
    }
    report.push(c_sub_a(c, &stage.a), Role::Theorem);
    report.push(d_sub_ta(&stage.a, &fr.d), Role::Theorem);
    report.push(d_sub_e(c, &fr.d), Role::Theorem);
    report.push(d_involutive(&stage.a, &fr.d, s), Role::Theorem);
    report.push(
        intersection_rank("ctcrk", c, &fr.d_rows, &fr.tc_rows, s),
        Role::Theorem,
    );
    report.push(
        intersection_rank("etark", c, &fr.e_rows, &fr.ta_rows, s),
        Role::Theorem,
    );
    let entry = prcond(c, stage, &fr, &mut report);
    report.push(entry, Role::Theorem);
    report.push(condi1(c, pi, s), Role::Descent);
    let entry = condi2("EEF", c, pi, opts, &mut report);
    report.push(entry, Role::Descent);
    report.push(
        lie_derivative_in_ideal("frameD", c, &pi.to_function(), &fr.d),
        Role::Theorem,
    );
    report.push(etcd("ETCD", c, pi, &fr, s), Role::Theorem);
    let sub = sharp_rows(c, pi, &c.e_annihilator());
    report.push(c.span_inclusion("NAE", &sub, &fr.ta_rows, s), Role::Info);
    finish(c, pi, opts, report)
}

fn etcd(
    id: &str,
    c: &SubmanifoldSpec,
    pi: &PoissonBivector,
    fr: &StageFrames,
    s: Sampling,
) -> VerdictEntry {
    let sub = sharp_rows(c, pi, &c.e_annihilator());
    let mut sup = fr.tc_rows.clone();
    sup.extend(fr.d_rows.iter().cloned());
    c.span_inclusion(id, &sub, &sup, s)
}

pub fn check_stages_a2(
    c: &SubmanifoldSpec,
    stage: &Stage,
    pi: &PoissonBivector,
    opts: &ReductionOptions,
) -> Result<ReductionReport, ReductionError> {
    let s = opts.sampling;
    let mut report = ReductionReport::new(Theorem::StagesA2);
    let fr = stage_frames(c, stage);
    let f = c.f_frame();
    report.frames.push(("F".into(), field_text(&f)));
    report.frames.push(("D".into(), field_text(&fr.d)));
    for entry in f_rank_entries(c, s) {
        report.push(entry, Role::Descent);
    }
    report.push(c_sub_a(c, &stage.a), Role::Theorem);
    let f_rows: PolyMatrix = f.iter().map(|x| c.field_row(x)).collect();
    report.push(
        c.span_inclusion("F_sub_D", &f_rows, &fr.d_rows, s),
        Role::Theorem,
    );
    report.push(d_sub_e(c, &fr.d), Role::Theorem);
    report.push(minimality(c, &stage.a, &fr, s), Role::Theorem);
    report.push(d_sub_ta(&stage.a, &fr.d), Role::Theorem);
    report.push(d_involutive(&stage.a, &fr.d, s), Role::Theorem);
    report.push(etcd("ETCDdois", c, pi, &fr, s), Role::Theorem);
    report.push(
        lie_derivative_in_ideal("Liedercon", c, &pi.to_function(), &fr.d),
        Role::Theorem,
    );
    report.push(condi1(c, pi, s), Role::Descent);
    let entry = condi2("condi2", c, pi, opts, &mut report);
    report.push(entry, Role::Descent);
    finish(c, pi, opts, report)
}

/// `TA|_C = TC + D|_C`, by comparing ranks with `dim A`.
fn minimality(
    c: &SubmanifoldSpec,
    a: &SubmanifoldSpec,
    fr: &StageFrames,
    s: Sampling,
) -> VerdictEntry {
    let mut rows = fr.tc_rows.clone();
    rows.extend(fr.d_rows.iter().cloned());
    let rank = c.rank_along(&rows, s);
    let dim_a = a.retained().len();
    if rank.generic != dim_a {
        VerdictEntry::fail(
            "minimality",
            format!("dim(TC + D|_C) = {} but dim A = {dim_a}", rank.generic),
        )
    } else if !rank.is_constant() {
        VerdictEntry::unknown(
            "minimality",
            format!(
                "dim(TC + D|_C) drops to {} at a sampled point",
                rank.sampled_min
            ),
        )
    } else {
        VerdictEntry::pass("minimality")
    }
}

/// Attaches the reduced bivector when every descent condition passes.
fn finish(
    c: &SubmanifoldSpec,
    pi: &PoissonBivector,
    opts: &ReductionOptions,
    mut report: ReductionReport,
) -> Result<ReductionReport, ReductionError> {
    if report.descends() != Verdict::Pass {
        report.reduction_error = None;
        return Ok(report);
    }
    // Without declared quotient coordinates only the hypotheses are audited.
    if c.quotient_coords().is_none() {
        return Ok(report);
    }
    match reduce_bivector(c, pi, opts) {
        Ok(red) => {
            let jacobi = if red.jacobi_defect.is_zero() {
                VerdictEntry::pass("jacobi")
            } else {
                VerdictEntry::fail("jacobi", format!("{{S, S}} = {}", red.jacobi_defect))
            };
            report.push(jacobi, Role::Theorem);
            report.reduced = Some(red);
        }
        Err(e @ ReductionError::NonBasic { .. }) => {
            report.push(
                VerdictEntry::fail("basic_bracket", e.to_string()),
                Role::Theorem,
            );
        }
        Err(e) => report.reduction_error = Some(e.to_string()),
    }
    Ok(report)
}

/// Context of the quotient: the quotient coordinates with their odd partners.
pub fn quotient_context(c: &SubmanifoldSpec) -> Result<GradedContext, ReductionError> {
    let q = c.quotient_coords().ok_or(ReductionError::NoQuotient)?;
    let ctx = c.context();
    Ok(GradedContext::from_names(
        q.iter().map(|&i| ctx.even()[i].clone()).collect(),
        q.iter().map(|&i| ctx.odd()[i].clone()).collect(),
    ))
}

pub fn default_degree_bound(c: &SubmanifoldSpec, pi: &PoissonBivector) -> u32 {
    let pi_deg = pi.entries().map(|(_, p)| p.degree()).max().unwrap_or(0);
    let even = c
        .even_generators()
        .iter()
        .map(Polynomial::degree)
        .max()
        .unwrap_or(0);
    let odd = c
        .theta_solved()
        .values()
        .flat_map(|img| img.terms().map(|(_, p)| p.degree()).collect::<Vec<_>>())
        .max()
        .unwrap_or(0);
    pi_deg + even.max(odd) + 2
}

/// Exponent vectors over the given variables of total degree at most `d`.
fn monomials_up_to(n: usize, support: &[usize], d: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::one(n)];
    for _ in 0..d {
        let mut next = Vec::new();
        for m in &out {
            for &v in support {
                let mut e = m.clone();
                e.0[v] += 1;
                next.push(e);
            }
        }
        out.extend(next);
        out.sort();
        out.dedup();
    }
    out
}

/// Lift `q + sum_a lambda_a g_a` of a retained coordinate such that its
/// differential annihilates `E` along `C`. Multipliers are polynomials in
/// the retained coordinates; the least degree that works is used, and among
/// solutions the one with free coefficients zero.
pub fn lift_coordinate(
    c: &SubmanifoldSpec,
    q: usize,
    bound: u32,
) -> Result<(Polynomial, u32), ReductionError> {
    let ctx = c.context();
    let vars = ctx.even();
    let n = ctx.dim();
    let gens = c.even_generators();
    let m = c.transversality_matrix();
    let xq = Polynomial::var(vars, q);
    let targets: Vec<Polynomial> = c
        .e_frame()
        .iter()
        .map(|e| c.restrict_poly(&GradedFunction::apply_vector_field(e, &xq).expect("degree 1")))
        .collect();
    let retained = c.retained();
    for d in 0..=bound {
        let monos = if gens.is_empty() {
            Vec::new()
        } else {
            monomials_up_to(n, &retained, d)
        };
        let unknowns: Vec<(usize, &Monomial)> = (0..gens.len())
            .flat_map(|a| monos.iter().map(move |mo| (a, mo)))
            .collect();
        // Rows are (frame index, monomial) pairs.
        let mut row_index: BTreeMap<(usize, Monomial), usize> = BTreeMap::new();
        let mut entries: Vec<(usize, usize, Rational)> = Vec::new();
        for (col, (a, mo)) in unknowns.iter().enumerate() {
            let basis = Polynomial::monomial(vars, (*mo).clone(), Rational::from_integer(1.into()));
            for (b, row) in m.iter().enumerate() {
                let prod = &row[*a] * &basis;
                for (tm, tc) in prod.terms() {
                    let len = row_index.len();
                    let r = *row_index.entry((b, tm.clone())).or_insert(len);
                    entries.push((r, col, tc.clone()));
                }
            }
        }
        for (b, t) in targets.iter().enumerate() {
            for (tm, _) in t.terms() {
                let len = row_index.len();
                row_index.entry((b, tm.clone())).or_insert(len);
            }
        }
        let rows = row_index.len();
        let mut mat = vec![vec![Rational::from_integer(0.into()); unknowns.len()]; rows];
        for (r, col, v) in entries {
            mat[r][col] += v;
        }
        let mut rhs = vec![Rational::from_integer(0.into()); rows];
        for (b, t) in targets.iter().enumerate() {
            for (tm, tc) in t.terms() {
                rhs[row_index[&(b, tm.clone())]] = -tc.clone();
            }
        }
        if let Some(sol) = linalg::rational_solve(&mat, &rhs, unknowns.len()) {
            let mut lift = xq.clone();
            for ((a, mo), v) in unknowns.iter().zip(sol) {
                let term = Polynomial::monomial(vars, (*mo).clone(), v);
                lift = &lift + &(&term * &gens[*a]);
            }
            return Ok((lift, d));
        }
    }
    Err(ReductionError::LiftInfeasible {
        coord: vars[q].clone(),
        bound,
    })
}

/// Reduced bivector on the quotient coordinates by the lift route.
pub fn reduce_bivector(
    c: &SubmanifoldSpec,
    pi: &PoissonBivector,
    opts: &ReductionOptions,
) -> Result<ReducedStructure, ReductionError> {
    let q = c
        .quotient_coords()
        .ok_or(ReductionError::NoQuotient)?
        .to_vec();
    let ctx = c.context();
    let bound = opts
        .degree_bound
        .unwrap_or_else(|| default_degree_bound(c, pi));
    let mut lifts = Vec::new();
    let mut lift_degree = 0;
    for &qi in &q {
        let (l, d) = lift_coordinate(c, qi, bound)?;
        lift_degree = lift_degree.max(d);
        lifts.push(l);
    }
    let qctx = quotient_context(c)?;
    let s = pi.to_function();
    let mut reduced = PoissonBivector::zero(&qctx);
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            let f = GradedFunction::from_poly(ctx, lifts[i].clone());
            let g = GradedFunction::from_poly(ctx, lifts[j].clone());
            let v = c.restrict_poly(&derived_bracket(&s, &f, &g)?);
            if let Some(bad) = v.support().into_iter().find(|k| !q.contains(k)) {
                return Err(ReductionError::NonBasic {
                    left: ctx.even()[q[i]].clone(),
                    right: ctx.even()[q[j]].clone(),
                    value: v.to_string(),
                    coord: ctx.even()[bad].clone(),
                });
            }
            reduced.set(i, j, v.embed(qctx.even()).map_err(GradedError::from)?);
        }
    }
    let defect = jacobi_defect(&reduced);
    Ok(ReducedStructure {
        bivector: reduced,
        jacobi_defect: defect,
        lifts: q
            .iter()
            .map(|&i| ctx.even()[i].clone())
            .zip(lifts)
            .collect(),
        lift_degree,
    })
}

/// Reads the reduced bivector directly off `S|_C` when only quotient
/// directions survive the restriction.
pub fn reduce_bivector_on_c(
    c: &SubmanifoldSpec,
    pi: &PoissonBivector,
) -> Result<PoissonBivector, ReductionError> {
    let q = c.quotient_coords().ok_or(ReductionError::NoQuotient)?;
    let ctx = c.context();
    let restricted = c.restrict(&pi.to_function());
    for (mask, coeff) in restricted.terms() {
        if let Some(i) = (0..ctx.dim()).find(|i| mask >> i & 1 == 1 && !q.contains(i)) {
            return Err(ReductionError::NotTangent(ctx.odd()[i].clone()));
        }
        if let Some(i) = coeff.support().into_iter().find(|i| !q.contains(i)) {
            return Err(ReductionError::NotTangent(ctx.even()[i].clone()));
        }
    }
    let qctx = quotient_context(c)?;
    Ok(PoissonBivector::from_function(&restricted.embed(&qctx)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r4() -> GradedContext {
        GradedContext::new(&["x1", "x2", "x3", "x4"])
    }

    fn std4() -> PoissonBivector {
        PoissonBivector::parse("th1*th2 + th3*th4", &r4()).unwrap()
    }

    fn counterex(alpha: &str) -> SubmanifoldSpec {
        SubmanifoldSpec::parse(
            &r4(),
            &[("x4", "0")],
            &[("th4", &format!("-({alpha})*th1"))],
        )
        .unwrap()
        .with_quotient_names(&["x1", "x2", "x3"])
        .unwrap()
    }

    fn translation_stage(alpha: &str) -> Stage {
        Stage {
            a: SubmanifoldSpec::ambient(&r4()),
            d: DistributionSpec::parse(&r4(), &[&format!("th4 + ({alpha})*th1")]).unwrap(),
        }
    }

    #[test]
    fn counterexample_poisson_when_alpha_ignores_x1() {
        let c = counterex("x2");
        let opts = ReductionOptions::default();
        let rep = check_stages_a2(&c, &translation_stage("x2"), &std4(), &opts).unwrap();
        assert_eq!(rep.overall(), Verdict::Pass, "{:?}", rep.conditions);
        let red = rep.reduced.unwrap();
        let qctx = quotient_context(&c).unwrap();
        assert_eq!(
            red.bivector,
            PoissonBivector::parse("th1*(th2 + x2*th3)", &qctx).unwrap()
        );
        assert!(red.jacobi_defect.is_zero());
        assert_eq!(
            red.lifts[0].1,
            Polynomial::parse("x1 - x2*x4", r4().even()).unwrap()
        );
    }

    #[test]
    fn counterexample_defect_when_alpha_is_x1() {
        let c = counterex("x1");
        let rep = check_stages_a2(
            &c,
            &translation_stage("x1"),
            &std4(),
            &ReductionOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.verdict_of("Liedercon"), Some(Verdict::Fail));
        assert_eq!(rep.descends(), Verdict::Pass);
        let red = rep.reduced.clone().unwrap();
        let qctx = quotient_context(&c).unwrap();
        assert_eq!(
            red.jacobi_defect,
            GradedFunction::parse("-2*th1*th2*th3", &qctx).unwrap()
        );
        assert_eq!(rep.verdict_of("jacobi"), Some(Verdict::Fail));
    }

    #[test]
    fn both_routes_agree_on_counterexample() {
        for alpha in ["x2", "x1", "x3^2 + x1*x2"] {
            let c = counterex(alpha);
            let lift = reduce_bivector(&c, &std4(), &ReductionOptions::default()).unwrap();
            assert_eq!(
                lift.bivector,
                reduce_bivector_on_c(&c, &std4()).unwrap(),
                "alpha = {alpha}"
            );
        }
    }

    #[test]
    fn zero_distribution_keeps_pi() {
        let c = SubmanifoldSpec::ambient(&r4())
            .with_quotient(vec![0, 1, 2, 3])
            .unwrap();
        let pi = PoissonBivector::parse("x3*th1*th2 + x2*th1*th4", &r4()).unwrap();
        assert!(jacobi_defect(&pi).is_zero());
        let rep = check_marsden_ratiu(&c, &pi, &ReductionOptions::default()).unwrap();
        assert_eq!(rep.overall(), Verdict::Pass);
        assert_eq!(rep.reduced.unwrap().bivector, pi);
    }

    #[test]
    fn poisson_submanifold_with_zero_e() {
        // C = {x4 = 0} with pi = d1^d2 is a Poisson submanifold.
        let pi = PoissonBivector::parse("x3*th1*th2", &r4()).unwrap();
        let c = SubmanifoldSpec::parse(&r4(), &[("x4", "0")], &[])
            .unwrap()
            .with_quotient(vec![0, 1, 2])
            .unwrap();
        let rep = check_coisotropic(&c, &pi, &ReductionOptions::default()).unwrap();
        assert_eq!(rep.overall(), Verdict::Pass);
        let qctx = quotient_context(&c).unwrap();
        assert_eq!(
            rep.reduced.unwrap().bivector,
            PoissonBivector::parse("x3*th1*th2", &qctx).unwrap()
        );
    }

    #[test]
    fn coisotropic_hamiltonian_of_constraint() {
        // #dx4 = -d3 for the standard structure; it lies in E iff d3 spans E.
        let with = SubmanifoldSpec::parse(&r4(), &[("x4", "0")], &[("th3", "0")]).unwrap();
        let rep = check_coisotropic(&with, &std4(), &ReductionOptions::default()).unwrap();
        assert_eq!(rep.verdict_of("sharpNC_sub_E"), Some(Verdict::Pass));
        assert_eq!(rep.verdict_of("E_sub_TC"), Some(Verdict::Pass));
        let without = SubmanifoldSpec::parse(&r4(), &[("x4", "0")], &[("th2", "0")]).unwrap();
        let rep = check_coisotropic(&without, &std4(), &ReductionOptions::default()).unwrap();
        assert_eq!(rep.verdict_of("sharpNC_sub_E"), Some(Verdict::Fail));
    }

    #[test]
    fn marsden_ratiu_agrees_with_coisotropic_when_e_tangent() {
        let c = SubmanifoldSpec::parse(&r4(), &[("x4", "0")], &[("th3", "0")])
            .unwrap()
            .with_quotient(vec![0, 1])
            .unwrap();
        let opts = ReductionOptions::default();
        let co = check_coisotropic(&c, &std4(), &opts).unwrap();
        let mr = check_marsden_ratiu(&c, &std4(), &opts).unwrap();
        assert_eq!(co.overall(), mr.overall());
        assert_eq!(co.reduced.unwrap().bivector, mr.reduced.unwrap().bivector);
    }

    #[test]
    fn normalizer_correction_matches_hand_computation() {
        let ctx = GradedContext::new(&["x1", "y1", "x2", "y2"]);
        let c = SubmanifoldSpec::parse(
            &ctx,
            &[("x2", "0"), ("y2", "0")],
            &[("th1", "0"), ("th3", "0"), ("th4", "-x1*th2")],
        )
        .unwrap();
        let frame = normalizer_frame(&c).unwrap();
        assert_eq!(
            frame,
            vec![GradedFunction::parse("th1 + y2*th2", &ctx).unwrap()]
        );
    }

    #[test]
    fn lift_degree_is_minimal() {
        let c = counterex("x2^2");
        let (lift, d) = lift_coordinate(&c, 0, 4).unwrap();
        assert_eq!(d, 2);
        assert_eq!(
            lift,
            Polynomial::parse("x1 - x2^2*x4", r4().even()).unwrap()
        );
        assert!(matches!(
            lift_coordinate(&c, 0, 1),
            Err(ReductionError::LiftInfeasible { .. })
        ));
    }

    #[test]
    fn magnetic_cotangent_lifts() {
        let ctx = GradedContext::from_names(
            ["x1", "x2", "y1", "y2"].map(String::from).to_vec(),
            ["Q1", "Q2", "P1", "P2"].map(String::from).to_vec(),
        );
        let pi = PoissonBivector::parse("Q1*P1 + Q2*P2", &ctx).unwrap();
        let c = SubmanifoldSpec::parse(
            &ctx,
            &[("y1", "0"), ("y2", "0")],
            &[("P1", "1/2*x1*Q2"), ("P2", "-1/2*x1*Q1")],
        )
        .unwrap()
        .with_quotient_names(&["x1", "x2"])
        .unwrap();
        let rep = check_marsden_ratiu(&c, &pi, &ReductionOptions::default()).unwrap();
        assert_eq!(rep.descends(), Verdict::Pass);
        let red = rep.reduced.unwrap();
        let lifts: Vec<String> = red.lifts.iter().map(|(_, l)| l.to_string()).collect();
        assert_eq!(lifts, ["-1/2*x1*y2 + x1", "1/2*x1*y1 + x2"]);
        let qctx = quotient_context(&c).unwrap();
        assert_eq!(
            red.bivector,
            PoissonBivector::parse("x1*Q1*Q2", &qctx).unwrap()
        );
        assert_eq!(red.bivector, reduce_bivector_on_c(&c, &pi).unwrap());
    }

    fn drinfeld_double() -> (GradedContext, PoissonBivector) {
        let ctx = GradedContext::new(&["x1", "x2", "y1", "y2"]);
        let pi = PoissonBivector::parse(
            "x2*th1*th2 + y2*th3*th4 - y2*th1*th4 + x2*th2*th3 + (y1 - x1)*th2*th4",
            &ctx,
        )
        .unwrap();
        (ctx, pi)
    }

    #[test]
    fn drinfeld_double_needs_stages() {
        let (ctx, pi) = drinfeld_double();
        assert!(jacobi_defect(&pi).is_zero());
        let c = SubmanifoldSpec::parse(
            &ctx,
            &[("y1", "0"), ("y2", "0")],
            &[("th3", "0"), ("th4", "0")],
        )
        .unwrap()
        .with_quotient_names(&["x1", "x2"])
        .unwrap();
        let opts = ReductionOptions::default();
        let mr = check_marsden_ratiu(&c, &pi, &opts).unwrap();
        assert_eq!(mr.verdict_of("sharpEann_sub_TC"), Some(Verdict::Fail));
        let stage = Stage {
            a: SubmanifoldSpec::ambient(&ctx),
            d: DistributionSpec::parse(&ctx, &["th3", "th4"]).unwrap(),
        };
        let a2 = check_stages_a2(&c, &stage, &pi, &opts).unwrap();
        assert_eq!(a2.overall(), Verdict::Pass, "{:?}", a2.conditions);
        let qctx = quotient_context(&c).unwrap();
        assert_eq!(
            a2.reduced.unwrap().bivector,
            PoissonBivector::parse("x2*th1*th2", &qctx).unwrap()
        );
    }

    #[test]
    fn two_stage_example_passes_a1() {
        let ctx = GradedContext::new(&["x1", "y1", "x2", "y2"]);
        let pi = PoissonBivector::parse("th1*th2 + th3*th4", &ctx).unwrap();
        let c = SubmanifoldSpec::parse(
            &ctx,
            &[("x2", "0"), ("y2", "0")],
            &[("th1", "0"), ("th3", "0"), ("th4", "-x1*th2")],
        )
        .unwrap()
        .with_quotient_names(&["y1"])
        .unwrap();
        let stage = Stage {
            a: SubmanifoldSpec::parse(&ctx, &[("y2", "0")], &[]).unwrap(),
            d: DistributionSpec::parse(&ctx, &["th1", "th3"]).unwrap(),
        };
        let rep = check_stages_a1(&c, &stage, &pi, &ReductionOptions::default()).unwrap();
        for cond in &rep.conditions {
            assert_eq!(cond.entry.verdict, Verdict::Pass, "{:?}", cond.entry);
        }
        let red = rep.reduced.unwrap();
        assert!(red.bivector.is_zero());
        assert_eq!(red.lifts[0].1.to_string(), "-x1*y2 + y1");
    }

    #[test]
    fn stages_catch_bad_distribution() {
        let ctx = GradedContext::new(&["x1", "y1", "x2", "y2"]);
        let pi = PoissonBivector::parse("th1*th2 + th3*th4", &ctx).unwrap();
        let c = SubmanifoldSpec::parse(
            &ctx,
            &[("x2", "0"), ("y2", "0")],
            &[("th1", "0"), ("th3", "0"), ("th4", "-x1*th2")],
        )
        .unwrap();
        let stage = Stage {
            a: SubmanifoldSpec::parse(&ctx, &[("y2", "0")], &[]).unwrap(),
            d: DistributionSpec::parse(&ctx, &["th1", "th4"]).unwrap(),
        };
        let rep = check_stages_a1(&c, &stage, &pi, &ReductionOptions::default()).unwrap();
        assert_eq!(rep.verdict_of("D_sub_TA"), Some(Verdict::Fail));
        assert_eq!(rep.verdict_of("D_sub_E"), Some(Verdict::Fail));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn reduced_bracket_ignores_lift_choice(seed in proptest::prelude::any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let vars = r4().even().clone();
            let alpha = crate::sample::random_polynomial(&mut rng, &vars, 2, 3);
            let c = counterex(&alpha.to_string());
            let red = reduce_bivector(&c, &std4(), &ReductionOptions::default()).unwrap();
            let x4 = Polynomial::var(&vars, 3);
            let s = std4().to_function();
            let lifts: Vec<GradedFunction> = red
                .lifts
                .iter()
                .map(|(_, l)| {
                    let h = crate::sample::random_polynomial(&mut rng, &vars, 2, 3);
                    GradedFunction::from_poly(&r4(), l + &(&(&x4 * &x4) * &h))
                })
                .collect();
            for i in 0..3 {
                for j in i + 1..3 {
                    let v = c.restrict_poly(&derived_bracket(&s, &lifts[i], &lifts[j]).unwrap());
                    let want = red.bivector.get(i, j).embed(&vars).unwrap();
                    proptest::prop_assert_eq!(v, want);
                }
            }
        }
    }
}
