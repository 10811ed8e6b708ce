//! Graph-form presentations of graded submanifolds of `T*[1]M`.
//!
//! A submanifold `C` of `M` is given by solving some even coordinates as
//! polynomials in the retained ones, `x_a = phi_a(x_R)`. A subbundle `E` of
//! `TM|_C` is given by solving some odd coordinates as linear combinations of
//! the others, `th_a = -sum_r A_ar th_r`; the frame of `E` is then
//! `e_a = d/dx_a + sum_r A_ar d/dx_r`. The vanishing ideal `I` of the graded
//! submanifold is generated by `x_a - phi_a` and `th_a + sum_r A_ar th_r`,
//! and reduction modulo `I` is plain substitution.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exactpoly::{Polynomial, Rational};
use crate::gradedalg::{schouten_bracket, GradedContext, GradedError, GradedFunction};
use crate::linalg::{self, PolyMatrix};
use crate::sample;
use crate::verdict::{Verdict, VerdictEntry};

pub const DEFAULT_SAMPLES: usize = 32;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubmanError {
    #[error(transparent)]
    Graded(#[from] GradedError),
    #[error("solved coordinate `{0}` appears in a graph function")]
    NotGraph(String),
    #[error("odd coordinate `{0}` is solved but appears in a solved relation")]
    CyclicOdd(String),
    #[error("odd relation for `{0}` is not of degree 1")]
    OddDegree(String),
    #[error("generator `{0}` does not lie in the ideal of the submanifold")]
    GeneratorNotInIdeal(String),
    #[error("quotient coordinate `{0}` is not a retained coordinate")]
    QuotientNotRetained(String),
    #[error("{0}")]
    Invalid(String),
}

/// Sampling parameters for rank and inclusion probes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubmanifoldSpec {
    ctx: GradedContext,
    solved_even: BTreeMap<usize, Polynomial>,
    theta_solved: BTreeMap<usize, GradedFunction>,
    extra: Vec<GradedFunction>,
    quotient: Option<Vec<usize>>,
}

impl SubmanifoldSpec {
    /// The whole ambient space with `E = 0`.
    pub fn ambient(ctx: &GradedContext) -> Self {
        SubmanifoldSpec {
            ctx: ctx.clone(),
            solved_even: BTreeMap::new(),
            theta_solved: BTreeMap::new(),
            extra: Vec::new(),
            quotient: None,
        }
    }

    pub fn new(
        ctx: &GradedContext,
        solved_even: BTreeMap<usize, Polynomial>,
        theta_solved: BTreeMap<usize, GradedFunction>,
    ) -> Result<Self, SubmanError> {
        for phi in solved_even.values() {
            for j in phi.support() {
                if solved_even.contains_key(&j) {
                    return Err(SubmanError::NotGraph(ctx.even()[j].clone()));
                }
            }
            if phi.vars() != ctx.even() {
                return Err(GradedError::ContextMismatch.into());
            }
        }
        for (a, img) in &theta_solved {
            if img.expect_degree(1).is_err() {
                return Err(SubmanError::OddDegree(ctx.odd()[*a].clone()));
            }
            if img.context() != ctx {
                return Err(GradedError::ContextMismatch.into());
            }
            for (mask, _) in img.terms() {
                let i = mask.trailing_zeros() as usize;
                if theta_solved.contains_key(&i) {
                    return Err(SubmanError::CyclicOdd(ctx.odd()[i].clone()));
                }
            }
        }
        Ok(SubmanifoldSpec {
            ctx: ctx.clone(),
            solved_even,
            theta_solved,
            extra: Vec::new(),
            quotient: None,
        })
    }

    /// Parses `x_a = phi` and `th_a = ...` relations given by name.
    pub fn parse(
        ctx: &GradedContext,
        solved: &[(&str, &str)],
        thetas: &[(&str, &str)],
    ) -> Result<Self, SubmanError> {
        let mut se = BTreeMap::new();
        for (name, src) in solved {
            let i = ctx
                .even_index(name)
                .ok_or_else(|| SubmanError::Invalid(format!("unknown even coordinate `{name}`")))?;
            let p = GradedFunction::parse(src, ctx)?;
            p.expect_degree(0)?;
            se.insert(i, p.body());
        }
        let mut ts = BTreeMap::new();
        for (name, src) in thetas {
            let i = ctx
                .odd_index(name)
                .ok_or_else(|| SubmanError::Invalid(format!("unknown odd coordinate `{name}`")))?;
            ts.insert(i, GradedFunction::parse(src, ctx)?);
        }
        Self::new(ctx, se, ts)
    }

    /// Brings degree-1 generators of `E` into graph form. Each pivot must be
    /// a nonzero constant; the rightmost such column is solved first.
    pub fn theta_relations_from_generators(
        ctx: &GradedContext,
        gens: &[GradedFunction],
    ) -> Result<BTreeMap<usize, GradedFunction>, SubmanError> {
        let mut rows = Vec::new();
        for g in gens {
            g.expect_degree(1)?;
            if g.context() != ctx {
                return Err(GradedError::ContextMismatch.into());
            }
            rows.push(g.vector_components()?);
        }
        let n = ctx.dim();
        let mut pivots: Vec<usize> = Vec::new();
        let mut done = 0;
        while done < rows.len() {
            let row = &rows[done];
            if row.iter().all(Polynomial::is_zero) {
                rows.remove(done);
                continue;
            }
            let col = (0..n)
                .rev()
                .find(|&j| !pivots.contains(&j) && row[j].is_constant() && !row[j].is_zero())
                .ok_or_else(|| {
                    SubmanError::Invalid(format!(
                        "generator {} has no constant pivot",
                        GradedFunction::vector_field(ctx, row)
                    ))
                })?;
            let inv = row[col].constant_term().recip();
            let pivot_row: Vec<Polynomial> = row.iter().map(|p| p.scale(&inv)).collect();
            for (k, other) in rows.iter_mut().enumerate() {
                if k == done || other[col].is_zero() {
                    continue;
                }
                let factor = other[col].clone();
                for j in 0..n {
                    other[j] = &other[j] - &(&factor * &pivot_row[j]);
                }
            }
            rows[done] = pivot_row;
            pivots.push(col);
            done += 1;
        }
        let mut out = BTreeMap::new();
        for (row, &a) in rows.iter().zip(&pivots) {
            let rest: Vec<Polynomial> = row
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    if j == a {
                        Polynomial::zero(ctx.even())
                    } else {
                        -p
                    }
                })
                .collect();
            out.insert(a, GradedFunction::vector_field(ctx, &rest));
        }
        Ok(out)
    }

    /// Adds declared degree-1 generators; each must already lie in the ideal.
    pub fn with_extra(mut self, gens: Vec<GradedFunction>) -> Result<Self, SubmanError> {
        for g in &gens {
            g.expect_degree(1)?;
            if !self.in_ideal(g) {
                return Err(SubmanError::GeneratorNotInIdeal(g.to_string()));
            }
        }
        self.extra = gens;
        Ok(self)
    }

    pub fn with_quotient(mut self, coords: Vec<usize>) -> Result<Self, SubmanError> {
        for &q in &coords {
            if self.solved_even.contains_key(&q) {
                return Err(SubmanError::QuotientNotRetained(self.ctx.even()[q].clone()));
            }
        }
        self.quotient = Some(coords);
        Ok(self)
    }

    pub fn with_quotient_names(self, names: &[&str]) -> Result<Self, SubmanError> {
        let mut ix = Vec::new();
        for n in names {
            ix.push(
                self.ctx
                    .even_index(n)
                    .ok_or_else(|| SubmanError::QuotientNotRetained(n.to_string()))?,
            );
        }
        self.with_quotient(ix)
    }

    pub fn context(&self) -> &GradedContext {
        &self.ctx
    }

    pub fn retained(&self) -> Vec<usize> {
        (0..self.ctx.dim())
            .filter(|i| !self.solved_even.contains_key(i))
            .collect()
    }

    pub fn solved_even(&self) -> &BTreeMap<usize, Polynomial> {
        &self.solved_even
    }

    pub fn theta_solved(&self) -> &BTreeMap<usize, GradedFunction> {
        &self.theta_solved
    }

    pub fn extra_generators(&self) -> &[GradedFunction] {
        &self.extra
    }

    pub fn quotient_coords(&self) -> Option<&[usize]> {
        self.quotient.as_deref()
    }

    /// Odd indices left free by the odd relations.
    pub fn unsolved_odd(&self) -> Vec<usize> {
        (0..self.ctx.dim())
            .filter(|i| !self.theta_solved.contains_key(i))
            .collect()
    }

    /// Degree-0 generators `x_a - phi_a`.
    pub fn even_generators(&self) -> Vec<Polynomial> {
        self.solved_even
            .iter()
            .map(|(a, phi)| &Polynomial::var(self.ctx.even(), *a) - phi)
            .collect()
    }

    /// Degree-1 generators `th_a - image_a`.
    pub fn odd_generators(&self) -> Vec<GradedFunction> {
        self.theta_solved
            .iter()
            .map(|(a, img)| &GradedFunction::theta(&self.ctx, *a) - img)
            .collect()
    }

    fn even_assignment(&self) -> BTreeMap<usize, &Polynomial> {
        self.solved_even.iter().map(|(k, v)| (*k, v)).collect()
    }

    /// Substitutes the graph functions into a polynomial.
    pub fn restrict_poly(&self, p: &Polynomial) -> Polynomial {
        p.subst_indexed(&self.even_assignment())
            .expect("graph form is acyclic")
    }

    /// Restricts the coefficients to `C` without touching odd coordinates.
    pub fn restrict_even(&self, f: &GradedFunction) -> GradedFunction {
        f.subst_even(&self.even_assignment())
            .expect("graph form is acyclic")
    }

    /// Normal form modulo the ideal.
    pub fn restrict(&self, f: &GradedFunction) -> GradedFunction {
        let base = self.restrict_even(f);
        let images: BTreeMap<usize, GradedFunction> = self
            .theta_solved
            .iter()
            .map(|(a, img)| (*a, self.restrict_even(img)))
            .collect();
        base.subst_odd(&images)
    }

    pub fn in_ideal(&self, f: &GradedFunction) -> bool {
        self.restrict(f).is_zero()
    }

    /// Frame `e_a` of `E`, extended off `C` by the stated coefficients.
    pub fn e_frame(&self) -> Vec<GradedFunction> {
        self.odd_generators()
    }

    /// Frame of `TC`: `t_r = d/dx_r + sum_a dphi_a/dx_r d/dx_a`.
    pub fn tc_frame(&self) -> Vec<GradedFunction> {
        self.retained()
            .into_iter()
            .map(|r| {
                let mut f = GradedFunction::theta(&self.ctx, r);
                for (a, phi) in &self.solved_even {
                    f = &f + &GradedFunction::term(&self.ctx, 1 << a, phi.diff_index(r));
                }
                f
            })
            .collect()
    }

    /// Conormal forms `d(x_a - phi_a)` as component lists.
    pub fn conormal_forms(&self) -> Vec<Vec<Polynomial>> {
        self.even_generators()
            .iter()
            .map(|g| (0..self.ctx.dim()).map(|i| g.diff_index(i)).collect())
            .collect()
    }

    /// Forms spanning the annihilator of `E`: `dx_r - sum_a A_ar dx_a`.
    pub fn e_annihilator(&self) -> Vec<Vec<Polynomial>> {
        let n = self.ctx.dim();
        let e = self.e_frame();
        self.unsolved_odd()
            .into_iter()
            .map(|r| {
                let mut form = vec![Polynomial::zero(self.ctx.even()); n];
                form[r] = Polynomial::one(self.ctx.even());
                for (frame, a) in e.iter().zip(self.theta_solved.keys()) {
                    // frame = th_a + A_ar th_r
                    form[*a] = -frame.coefficient(1 << r);
                }
                form
            })
            .collect()
    }

    /// Matrix `e_b(g_a)` along `C`, rows indexed by `E` frames.
    pub fn transversality_matrix(&self) -> PolyMatrix {
        let gens = self.even_generators();
        self.e_frame()
            .iter()
            .map(|e| {
                gens.iter()
                    .map(|g| {
                        let v = GradedFunction::apply_vector_field(e, g).expect("degree 1");
                        self.restrict_poly(&v)
                    })
                    .collect()
            })
            .collect()
    }

    /// Frame of `F = TC ∩ E`: combinations of `E` frames in the left kernel
    /// of the transversality matrix.
    pub fn f_frame(&self) -> Vec<GradedFunction> {
        let m = self.transversality_matrix();
        let e = self.e_frame();
        if self.solved_even.is_empty() {
            return e;
        }
        let kernel = if m.is_empty() {
            Vec::new()
        } else {
            linalg::poly_left_kernel(&m, self.ctx.even())
        };
        kernel
            .into_iter()
            .map(|c| {
                c.iter()
                    .zip(&e)
                    .fold(GradedFunction::zero(&self.ctx), |acc, (ci, ei)| {
                        &acc + &ei.mul_poly(ci)
                    })
            })
            .collect()
    }

    /// Seeded sample points on `C`: random retained coordinates, solved ones
    /// from the graph.
    pub fn sample_points(&self, sampling: Sampling) -> Vec<Vec<Rational>> {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
        (0..sampling.samples)
            .map(|_| {
                let mut pt = sample::random_point(&mut rng, self.ctx.dim());
                for (a, phi) in &self.solved_even {
                    pt[*a] = phi.eval(&pt);
                }
                pt
            })
            .collect()
    }

    pub fn geometric_objects(&self, sampling: Sampling) -> GeometricObjects {
        let f = self.f_frame();
        let f_rows: PolyMatrix = f.iter().map(|x| self.field_row(x)).collect();
        let f_rank = self.rank_along(&f_rows, sampling);
        GeometricObjects {
            tc: self.tc_frame(),
            e: self.e_frame(),
            f,
            e_annihilator: self.e_annihilator(),
            conormal: self.conormal_forms(),
            f_rank,
        }
    }

    /// Restricted components of a vector field.
    pub fn field_row(&self, x: &GradedFunction) -> Vec<Polynomial> {
        (0..self.ctx.dim())
            .map(|i| self.restrict_poly(&x.coefficient(1 << i)))
            .collect()
    }

    /// Rank of a matrix of functions along `C`: generic rank over the
    /// fraction field and the range over sampled points.
    pub fn rank_along(&self, rows: &[Vec<Polynomial>], sampling: Sampling) -> RankSample {
        let restricted: PolyMatrix = rows
            .iter()
            .map(|r| r.iter().map(|p| self.restrict_poly(p)).collect())
            .collect();
        let generic = linalg::poly_rank(&restricted);
        let mut min = generic;
        let mut max = if rows.is_empty() { 0 } else { generic };
        let mut drop_point = None;
        for pt in self.sample_points(sampling) {
            let r = linalg::rational_rank(&linalg::eval_matrix(&restricted, &pt));
            if r < min {
                min = r;
                drop_point.get_or_insert(pt);
            }
            max = max.max(r);
        }
        RankSample {
            generic,
            sampled_min: min,
            sampled_max: max,
            drop_point,
        }
    }

    /// Is `span(sub)` contained in `span(sup)` along `C`?
    pub fn span_inclusion(
        &self,
        id: &str,
        sub: &[Vec<Polynomial>],
        sup: &[Vec<Polynomial>],
        sampling: Sampling,
    ) -> VerdictEntry {
        let base = self.rank_along(sup, sampling);
        let mut all: PolyMatrix = sup.to_vec();
        for (k, v) in sub.iter().enumerate() {
            let mut ext = all.clone();
            ext.push(v.clone());
            let r = self.rank_along(
                &ext,
                Sampling {
                    samples: 0,
                    ..sampling
                },
            );
            if r.generic > base.generic {
                let text: Vec<String> = v
                    .iter()
                    .map(|p| self.restrict_poly(p).to_string())
                    .collect();
                return VerdictEntry::fail(
                    id,
                    format!("vector #{k} [{}] is not in the span", text.join(", ")),
                );
            }
            all = ext;
        }
        let joint = self.rank_along(&all, sampling);
        if joint.sampled_min == base.sampled_min
            && joint.sampled_max == base.sampled_max
            && base.sampled_min == base.generic
        {
            VerdictEntry::pass(id)
        } else {
            VerdictEntry::unknown(
                id,
                format!(
                    "generic inclusion holds but ranks degenerate at samples ({}..{} vs {}..{})",
                    base.sampled_min, base.sampled_max, joint.sampled_min, joint.sampled_max
                ),
            )
        }
    }

    /// Constant-rank presymplectic probe for the ideal `I`.
    pub fn bracket_matrix_rank_probe(&self, sampling: Sampling) -> RankReport {
        let m = self.transversality_matrix();
        let degree0 = self.rank_along(&m, sampling);
        let f = self.f_frame();
        let mut gamma_witness = None;
        'outer: for (i, x) in f.iter().enumerate() {
            for (j, y) in f.iter().enumerate().skip(i + 1) {
                let b = schouten_bracket(x, y).expect("same context");
                let r = self.restrict(&b);
                if !r.is_zero() {
                    gamma_witness = Some(format!("[F{i}, F{j}] = {r} mod I"));
                    break 'outer;
                }
            }
        }
        let verdict = if gamma_witness.is_some() {
            RankVerdict::NotConstant
        } else if degree0.sampled_min < degree0.generic {
            RankVerdict::Unknown
        } else {
            RankVerdict::Constant
        };
        RankReport {
            degree0_rank: 2 * degree0.generic,
            sampled_min: 2 * degree0.sampled_min,
            sampled_max: 2 * degree0.sampled_max,
            f_dim: self.theta_solved.len().saturating_sub(degree0.generic),
            full_matrix: self.full_bracket_matrix(),
            gamma_witness,
            verdict,
        }
    }

    /// The matrix `{phi_I, phi_J}` mod `I` over all generators, even ones
    /// first.
    pub fn full_bracket_matrix(&self) -> Vec<Vec<GradedFunction>> {
        let gens: Vec<GradedFunction> = self
            .even_generators()
            .into_iter()
            .map(|g| GradedFunction::from_poly(&self.ctx, g))
            .chain(self.odd_generators())
            .collect();
        gens.iter()
            .map(|a| {
                gens.iter()
                    .map(|b| self.restrict(&schouten_bracket(a, b).expect("same context")))
                    .collect()
            })
            .collect()
    }

    pub fn rank_verdict(&self, id: &str, sampling: Sampling) -> (VerdictEntry, RankReport) {
        let report = self.bracket_matrix_rank_probe(sampling);
        let entry = match report.verdict {
            RankVerdict::Constant => VerdictEntry::pass(id),
            RankVerdict::NotConstant => {
                VerdictEntry::fail(id, report.gamma_witness.clone().unwrap_or_default())
            }
            RankVerdict::Unknown => VerdictEntry::unknown(
                id,
                format!(
                    "generic rank {} but sampled minimum {}",
                    report.degree0_rank, report.sampled_min
                ),
            ),
        };
        (entry, report)
    }
}

/// Generic and sampled rank of a matrix along `C`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankSample {
    pub generic: usize,
    pub sampled_min: usize,
    pub sampled_max: usize,
    pub drop_point: Option<Vec<Rational>>,
}

impl RankSample {
    pub fn is_constant(&self) -> bool {
        self.sampled_min == self.generic && self.sampled_max == self.generic
    }

    pub fn verdict(&self) -> Verdict {
        if self.is_constant() {
            Verdict::Pass
        } else {
            Verdict::Unknown
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankVerdict {
    Constant,
    NotConstant,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankReport {
    /// Rank of the degree-0 block of the bracket matrix over the fraction
    /// field of `C`.
    pub degree0_rank: usize,
    pub sampled_min: usize,
    pub sampled_max: usize,
    /// Generic dimension of `F = TC ∩ E`.
    pub f_dim: usize,
    pub full_matrix: Vec<Vec<GradedFunction>>,
    /// A bracket of `F` frames outside the ideal, if any.
    pub gamma_witness: Option<String>,
    pub verdict: RankVerdict,
}

/// Explicit frames along `C`.
#[derive(Clone, Debug)]
pub struct GeometricObjects {
    pub tc: Vec<GradedFunction>,
    pub e: Vec<GradedFunction>,
    pub f: Vec<GradedFunction>,
    pub e_annihilator: Vec<Vec<Polynomial>>,
    pub conormal: Vec<Vec<Polynomial>>,
    pub f_rank: RankSample,
}

/// Degree-1 generators of a distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributionSpec {
    pub generators: Vec<GradedFunction>,
}

impl DistributionSpec {
    pub fn new(generators: Vec<GradedFunction>) -> Result<Self, SubmanError> {
        for g in &generators {
            g.expect_degree(1)?;
        }
        Ok(DistributionSpec { generators })
    }

    pub fn parse(ctx: &GradedContext, gens: &[&str]) -> Result<Self, SubmanError> {
        let g: Result<Vec<_>, _> = gens.iter().map(|s| GradedFunction::parse(s, ctx)).collect();
        Self::new(g?)
    }

    pub fn rows(&self, on: &SubmanifoldSpec) -> PolyMatrix {
        self.generators.iter().map(|g| on.field_row(g)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::random_homogeneous;

    fn r3() -> GradedContext {
        GradedContext::new(&["x1", "x2", "x3"])
    }

    fn r4() -> GradedContext {
        GradedContext::new(&["x1", "x2", "x3", "x4"])
    }

    fn counterex(alpha: &str) -> SubmanifoldSpec {
        SubmanifoldSpec::parse(
            &r4(),
            &[("x4", "0")],
            &[("th4", &format!("-({alpha})*th1"))],
        )
        .unwrap()
    }

    #[test]
    fn restriction_of_standard_s() {
        let c = counterex("x2*x3 + x1");
        let s = GradedFunction::parse("th1*th2 + th3*th4", &r4()).unwrap();
        let expected = GradedFunction::parse("th1*(th2 + (x2*x3 + x1)*th3)", &r4()).unwrap();
        assert_eq!(c.restrict(&s), expected);
    }

    #[test]
    fn generators_lie_in_ideal() {
        let c = counterex("x2");
        for g in c.even_generators() {
            assert!(c.in_ideal(&GradedFunction::from_poly(&r4(), g)));
        }
        for g in c.odd_generators() {
            assert!(c.in_ideal(&g));
        }
        assert!(c.in_ideal(&GradedFunction::parse("th4 + x2*th1", &r4()).unwrap()));
        assert!(!c.in_ideal(&GradedFunction::parse("x1", &r4()).unwrap()));
    }

    #[test]
    fn rejects_non_graph_input() {
        let e = SubmanifoldSpec::parse(&r4(), &[("x4", "x3"), ("x3", "x1")], &[]);
        assert!(matches!(e, Err(SubmanError::NotGraph(_))));
        let e = SubmanifoldSpec::parse(&r4(), &[], &[("th4", "th3"), ("th3", "th1")]);
        assert!(matches!(e, Err(SubmanError::CyclicOdd(_))));
        let e = SubmanifoldSpec::parse(&r4(), &[], &[("th4", "th3*th1")]);
        assert!(matches!(e, Err(SubmanError::OddDegree(_))));
    }

    #[test]
    fn rank_probe_on_presymplectic_examples() {
        // E spanned by d1 and d2 - x1 d3 on R^3.
        let a = SubmanifoldSpec::parse(&r3(), &[], &[("th1", "0"), ("th2", "x1*th3")]).unwrap();
        let ra = a.bracket_matrix_rank_probe(Sampling::default());
        assert_eq!(ra.degree0_rank, 0);
        assert_eq!(ra.verdict, RankVerdict::NotConstant);
        let th3 = GradedFunction::parse("th3", &r3()).unwrap();
        assert_eq!(ra.full_matrix[0][1], -th3.clone());
        assert_eq!(ra.full_matrix[1][0], th3);

        let b = SubmanifoldSpec::parse(&r3(), &[("x2", "0")], &[("th1", "0"), ("th2", "x1*th3")])
            .unwrap();
        let rb = b.bracket_matrix_rank_probe(Sampling::default());
        assert_eq!(rb.verdict, RankVerdict::Constant);
        assert_eq!(rb.degree0_rank, 2);
        assert_eq!(rb.f_dim, 1);
        assert_eq!(rb.full_matrix.len(), 3);

        let m = SubmanifoldSpec::ambient(&r3());
        let rm = m.bracket_matrix_rank_probe(Sampling::default());
        assert_eq!((rm.degree0_rank, rm.verdict), (0, RankVerdict::Constant));
    }

    #[test]
    fn rank_drop_is_unknown() {
        // e_1 = d1 + x1 d4 is transversal to C = {x4 = 0} only off x1 = 0.
        let c = SubmanifoldSpec::parse(&r4(), &[("x4", "0")], &[("th1", "-x1*th4")]).unwrap();
        let report = c.rank_along(
            &c.transversality_matrix(),
            Sampling {
                samples: 400,
                seed: 1,
            },
        );
        assert_eq!(report.generic, 1);
        assert_eq!(report.sampled_min, 0);
    }

    #[test]
    fn frames_for_counterexample() {
        let c = counterex("x2");
        let objs = c.geometric_objects(Sampling::default());
        assert!(objs.f.is_empty());
        assert_eq!(objs.tc.len(), 3);
        assert_eq!(objs.e_annihilator.len(), 3);
        // Annihilator kills the frame of E.
        for form in &objs.e_annihilator {
            for e in &objs.e {
                let row = c.field_row(e);
                let pairing = form
                    .iter()
                    .zip(&row)
                    .fold(Polynomial::zero(r4().even()), |acc, (a, b)| &acc + &(a * b));
                assert!(c.restrict_poly(&pairing).is_zero());
            }
        }
    }

    #[test]
    fn generators_to_graph_form() {
        let g = |s: &str| GradedFunction::parse(s, &r4()).unwrap();
        let rel =
            SubmanifoldSpec::theta_relations_from_generators(&r4(), &[g("th4 + x2*th1")]).unwrap();
        assert_eq!(rel.len(), 1);
        assert_eq!(rel[&3], g("-x2*th1"));
        // Dependent rows drop out, elimination clears the pivot columns.
        let rel = SubmanifoldSpec::theta_relations_from_generators(
            &r4(),
            &[g("th4 + th3"), g("2*th4 + 2*th3"), g("th3 + x1*th1")],
        )
        .unwrap();
        assert_eq!(rel.len(), 2);
        assert_eq!(rel[&3], g("x1*th1"));
        assert_eq!(rel[&2], g("-x1*th1"));
        let bad = SubmanifoldSpec::theta_relations_from_generators(&r4(), &[g("x1*th1")]);
        assert!(matches!(bad, Err(SubmanError::Invalid(_))));
    }

    #[test]
    fn contact_distribution_f_equals_e() {
        let c = SubmanifoldSpec::parse(&r3(), &[], &[("th1", "0"), ("th2", "x1*th3")]).unwrap();
        let objs = c.geometric_objects(Sampling::default());
        assert_eq!(objs.f, objs.e);
        assert!(objs.f_rank.is_constant());
    }

    #[test]
    fn span_inclusion_verdicts() {
        let c = SubmanifoldSpec::ambient(&r3());
        let p = |s: &str| Polynomial::parse(s, r3().even()).unwrap();
        let sup = vec![vec![p("1"), p("0"), p("0")], vec![p("0"), p("1"), p("x1")]];
        let inside = vec![vec![p("x2"), p("x3"), p("x1*x3")]];
        let outside = vec![vec![p("0"), p("0"), p("1")]];
        let s = Sampling::default();
        assert_eq!(
            c.span_inclusion("in", &inside, &sup, s).verdict,
            Verdict::Pass
        );
        assert_eq!(
            c.span_inclusion("out", &outside, &sup, s).verdict,
            Verdict::Fail
        );
    }

    #[test]
    fn restriction_is_multiplicative_and_ideal_absorbs() {
        use rand::SeedableRng;
        let c = counterex("x2 + x1*x3");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random_homogeneous(&mut rng, &r4(), 1, 2, 3);
            let b = random_homogeneous(&mut rng, &r4(), 2, 2, 3);
            assert_eq!(c.restrict(&(&a * &b)), &c.restrict(&a) * &c.restrict(&b));
            for g in c.odd_generators() {
                assert!(c.in_ideal(&(&g * &b)));
            }
            let x4 = GradedFunction::parse("x4", &r4()).unwrap();
            assert!(c.in_ideal(&(&x4 * &a)));
        }
    }
}
