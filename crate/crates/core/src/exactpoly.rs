//! Exact multivariate polynomials over the rationals.
//!
//! A [`Polynomial`] is a sparse map from exponent vectors to non-zero
//! [`Rational`] coefficients over a named, ordered variable list. Terms are
//! kept in graded-lexicographic order, which is also the printing order
//! (highest degree first).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::expr::{self, Evaluator};

pub type Rational = BigRational;

/// Shared, ordered list of even-coordinate names.
pub type Vars = Arc<[String]>;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn vars(names: &[&str]) -> Vars {
    names
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .into()
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("variable context mismatch: [{left}] vs [{right}]")]
    ContextMismatch { left: String, right: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("cyclic assignment: substituted variable `{0}` appears in an image")]
    CyclicAssignment(String),
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
}

/// Exponent vector ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    fn div(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    vars: Vars,
    terms: BTreeMap<Monomial, Rational>,
}

fn join(v: &Vars) -> String {
    v.join(",")
}

fn same_vars(a: &Vars, b: &Vars) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl Polynomial {
    pub fn zero(vars: &Vars) -> Self {
        Polynomial {
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &Vars, c: Rational) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(vars.len()), c);
        }
        p
    }

    pub fn one(vars: &Vars) -> Self {
        Self::constant(vars, Rational::one())
    }

    /// The coordinate function of variable `i`.
    pub fn var(vars: &Vars, i: usize) -> Self {
        let mut e = vec![0; vars.len()];
        e[i] = 1;
        Self::monomial(vars, Monomial(e), Rational::one())
    }

    pub fn var_named(vars: &Vars, name: &str) -> Result<Self, PolyError> {
        let i = vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| PolyError::UnknownVariable(name.to_string()))?;
        Ok(Self::var(vars, i))
    }

    pub fn monomial(vars: &Vars, m: Monomial, c: Rational) -> Self {
        assert_eq!(m.0.len(), vars.len(), "exponent arity");
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn from_terms(vars: &Vars, terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = Self::zero(vars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn parse(src: &str, vars: &Vars) -> Result<Self, PolyError> {
        let e = expr::parse(src)?;
        expr::evaluate(&PolyEval(vars.clone()), &e)
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.degree() == 0)
    }

    pub fn constant_term(&self) -> Rational {
        self.terms
            .get(&Monomial::one(self.vars.len()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    /// Indices of the variables that actually occur.
    pub fn support(&self) -> Vec<usize> {
        (0..self.vars.len())
            .filter(|&i| self.terms.keys().any(|m| m.0[i] > 0))
            .collect()
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    fn check(&self, other: &Polynomial) -> Result<(), PolyError> {
        if same_vars(&self.vars, &other.vars) {
            Ok(())
        } else {
            Err(PolyError::ContextMismatch {
                left: join(&self.vars),
                right: join(&other.vars),
            })
        }
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    /// Exact product; the operands must share their variable context.
    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check(other)?;
        let mut out = Polynomial::zero(&self.vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(&self.vars);
        }
        Polynomial {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::one(&self.vars);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Partial derivative with respect to the named variable.
    pub fn diff(&self, var: &str) -> Result<Polynomial, PolyError> {
        let i = self
            .vars
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| PolyError::UnknownVariable(var.to_string()))?;
        Ok(self.diff_index(i))
    }

    pub fn diff_index(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(&self.vars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.0[i] -= 1;
            out.add_term(m2, c * Rational::from_integer(BigInt::from(e)));
        }
        out
    }

    /// Simultaneous substitution `var -> image`. Every image must live in the
    /// same context as `self`, and no substituted variable may occur in any
    /// image.
    pub fn subst(
        &self,
        assignments: &BTreeMap<String, Polynomial>,
    ) -> Result<Polynomial, PolyError> {
        let mut by_index: BTreeMap<usize, &Polynomial> = BTreeMap::new();
        for (name, image) in assignments {
            let i = self
                .vars
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| PolyError::UnknownVariable(name.clone()))?;
            self.check(image)?;
            by_index.insert(i, image);
        }
        self.subst_indexed(&by_index)
    }

    pub(crate) fn subst_indexed(
        &self,
        by_index: &BTreeMap<usize, &Polynomial>,
    ) -> Result<Polynomial, PolyError> {
        for image in by_index.values() {
            for j in image.support() {
                if by_index.contains_key(&j) {
                    return Err(PolyError::CyclicAssignment(self.vars[j].clone()));
                }
            }
        }
        if by_index.is_empty() {
            return Ok(self.clone());
        }
        let mut powers: BTreeMap<(usize, u32), Polynomial> = BTreeMap::new();
        let mut out = Polynomial::zero(&self.vars);
        for (m, c) in &self.terms {
            let mut kept = m.clone();
            let mut factor = Polynomial::one(&self.vars);
            for (&i, image) in by_index {
                let e = m.0[i];
                if e == 0 {
                    continue;
                }
                kept.0[i] = 0;
                let pw = powers.entry((i, e)).or_insert_with(|| image.pow(e));
                factor = &factor * pw;
            }
            for (fm, fc) in &factor.terms {
                out.add_term(fm.mul(&kept), fc * c);
            }
        }
        Ok(out)
    }

    pub fn eval(&self, point: &[Rational]) -> Rational {
        assert_eq!(point.len(), self.vars.len(), "point arity");
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in point.iter().zip(&m.0) {
                for _ in 0..e {
                    t *= x;
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.vars.len(), "point arity");
        self.terms
            .iter()
            .map(|(m, c)| {
                m.0.iter()
                    .zip(point)
                    .fold(rat_to_f64(c), |acc, (&e, &x)| acc * x.powi(e as i32))
            })
            .sum()
    }

    /// Exact quotient `self / d` when `d` divides `self`, otherwise `None`.
    pub fn exact_div(&self, d: &Polynomial) -> Option<Polynomial> {
        self.check(d).ok()?;
        let (lm, lc) = d.leading_term()?;
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut q = Polynomial::zero(&self.vars);
        while let Some((rm, rc)) = rem.leading_term() {
            if !lm.divides(rm) {
                return None;
            }
            let t = Polynomial::monomial(&self.vars, rm.div(&lm), rc / &lc);
            rem = &rem - &(&t * d);
            q = &q + &t;
        }
        Some(q)
    }

    /// Re-express in another context, matching variables by name.
    pub fn embed(&self, target: &Vars) -> Result<Polynomial, PolyError> {
        if same_vars(&self.vars, target) {
            return Ok(self.clone());
        }
        let map: Vec<Option<usize>> = self
            .vars
            .iter()
            .map(|v| target.iter().position(|t| t == v))
            .collect();
        let mut out = Polynomial::zero(target);
        for (m, c) in &self.terms {
            let mut e = vec![0; target.len()];
            for (i, &k) in m.0.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let j = map[i].ok_or_else(|| PolyError::UnknownVariable(self.vars[i].clone()))?;
                e[j] += k;
            }
            out.add_term(Monomial(e), c.clone());
        }
        Ok(out)
    }

    /// Scales so the leading coefficient is one.
    pub fn monic(&self) -> Polynomial {
        match self.leading_term() {
            Some((_, c)) => self.scale(&(Rational::one() / c)),
            None => self.clone(),
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let a = c.abs();
            let mono = format_monomial(&self.vars, m);
            if mono.is_empty() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{a}*{mono}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn format_monomial(vars: &Vars, m: &Monomial) -> String {
    let mut parts = Vec::new();
    for (name, &e) in vars.iter().zip(&m.0) {
        match e {
            0 => {}
            1 => parts.push(name.clone()),
            _ => parts.push(format!("{name}^{e}")),
        }
    }
    parts.join("*")
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&Polynomial> for &Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                let f: fn(&Polynomial, &Polynomial) -> Result<Polynomial, PolyError> = $body;
                f(self, rhs).expect("polynomial operands must share a variable context")
            }
        }
        impl $tr<Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.try_add(b));
forward_binop!(Sub, sub, |a, b| a.try_add(&-b));
forward_binop!(Mul, mul, |a, b| a.try_mul(b));

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

struct PolyEval(Vars);

impl Evaluator for PolyEval {
    type Elem = Polynomial;
    fn constant(&self, c: Rational) -> Polynomial {
        Polynomial::constant(&self.0, c)
    }
    fn symbol(&self, name: &str) -> Option<Polynomial> {
        Polynomial::var_named(&self.0, name).ok()
    }
    fn add(&self, a: &Polynomial, b: &Polynomial) -> Polynomial {
        a + b
    }
    fn mul(&self, a: &Polynomial, b: &Polynomial) -> Polynomial {
        a * b
    }
    fn neg(&self, a: &Polynomial) -> Polynomial {
        -a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx() -> Vars {
        vars(&["x1", "x2", "x3"])
    }

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s, &ctx()).unwrap()
    }

    #[test]
    fn difference_of_squares() {
        assert_eq!(&p("x1 + 1") * &p("x1 - 1"), p("x1^2 - 1"));
    }

    #[test]
    fn zero_annihilates() {
        assert!((&Polynomial::zero(&ctx()) * &p("x1*x2 + 7")).is_zero());
    }

    #[test]
    fn commutative_product() {
        assert_eq!(&p("x2") * &p("x1"), p("x1*x2"));
    }

    #[test]
    fn product_rejects_other_context() {
        let other = Polynomial::var(&vars(&["y1"]), 0);
        assert!(matches!(
            p("x1").try_mul(&other),
            Err(PolyError::ContextMismatch { .. })
        ));
    }

    #[test]
    fn derivatives() {
        assert_eq!(p("x1^2*x2").diff("x1").unwrap(), p("2*x1*x2"));
        assert!(p("x2").diff("x1").unwrap().is_zero());
        assert_eq!(p("x1*x2 + x3^3").diff("x3").unwrap(), p("3*x3^2"));
        assert_eq!(
            p("x1").diff("z"),
            Err(PolyError::UnknownVariable("z".into()))
        );
    }

    #[test]
    fn substitutions() {
        let mut a = BTreeMap::new();
        a.insert("x3".to_string(), Polynomial::zero(&ctx()));
        assert_eq!(p("x1 + x3").subst(&a).unwrap(), p("x1"));

        let mut b = BTreeMap::new();
        b.insert("x2".to_string(), p("x1^2"));
        assert_eq!(p("x2^2").subst(&b).unwrap(), p("x1^4"));

        assert_eq!(
            p("x1*x2 - 5").subst(&BTreeMap::new()).unwrap(),
            p("x1*x2 - 5")
        );
    }

    #[test]
    fn cyclic_assignment_rejected() {
        let mut a = BTreeMap::new();
        a.insert("x1".to_string(), p("x2"));
        a.insert("x2".to_string(), p("x3"));
        assert_eq!(
            p("x1").subst(&a),
            Err(PolyError::CyclicAssignment("x2".into()))
        );
        let mut b = BTreeMap::new();
        b.insert("x1".to_string(), p("x1 + 1"));
        assert!(p("x1").subst(&b).is_err());
    }

    #[test]
    fn simultaneous_not_sequential() {
        // x1 -> x3, x2 -> x3 is fine; images only mention untouched variables.
        let mut a = BTreeMap::new();
        a.insert("x1".to_string(), p("x3"));
        a.insert("x2".to_string(), p("2*x3"));
        assert_eq!(p("x1*x2").subst(&a).unwrap(), p("2*x3^2"));
    }

    #[test]
    fn printing_is_graded_lex() {
        assert_eq!(
            p("1 + x3 + x1*x2 - 3/2*x1^2").to_string(),
            "-3/2*x1^2 + x1*x2 + x3 + 1"
        );
        assert_eq!(p("x2 - x2").to_string(), "0");
        assert_eq!(p("-x1").to_string(), "-x1");
    }

    #[test]
    fn print_parse_roundtrip() {
        let q = p("(x1 - 2*x3)^3 + 5/7*x2");
        assert_eq!(Polynomial::parse(&q.to_string(), &ctx()).unwrap(), q);
    }

    #[test]
    fn exact_division() {
        let a = p("x1^2 - x2^2");
        assert_eq!(a.exact_div(&p("x1 - x2")).unwrap(), p("x1 + x2"));
        assert!(p("x1^2 + 1").exact_div(&p("x1")).is_none());
        assert_eq!(p("3*x1").exact_div(&p("6")).unwrap(), p("1/2*x1"));
    }

    #[test]
    fn embed_by_name() {
        let q = p("x1*x3 + 2");
        let target = vars(&["x3", "x1"]);
        let e = q.embed(&target).unwrap();
        assert_eq!(e, Polynomial::parse("x1*x3 + 2", &target).unwrap());
        assert!(p("x2").embed(&target).is_err());
    }

    #[test]
    fn rationals_stay_reduced() {
        let q = p("2/4*x1");
        let (_, c) = q.terms().next().unwrap();
        assert_eq!(c, &rat(1, 2));
        assert!(c.denom() > &BigInt::zero());
    }

    fn arb_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec(((0u32..3, 0u32..3, 0u32..3), -5i64..6, 1i64..4), 0..5).prop_map(
            |ts| {
                Polynomial::from_terms(
                    &ctx(),
                    ts.into_iter()
                        .map(|((a, b, c), n, d)| (Monomial(vec![a, b, c]), rat(n, d))),
                )
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn ring_axioms(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert!((&a - &a).is_zero());
        }

        #[test]
        fn leibniz(a in arb_poly(), b in arb_poly(), i in 0usize..3) {
            let lhs = (&a * &b).diff_index(i);
            let rhs = &(&a.diff_index(i) * &b) + &(&a * &b.diff_index(i));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn substitution_is_ring_morphism(a in arb_poly(), b in arb_poly(), img in arb_poly()) {
            // Image may only mention x1 and x2 when substituting x3.
            let img = img.subst(&[("x3".to_string(), Polynomial::zero(&ctx()))].into_iter().collect()).unwrap();
            let asg: BTreeMap<String, Polynomial> = [("x3".to_string(), img)].into_iter().collect();
            let lhs = (&a * &b).subst(&asg).unwrap();
            let rhs = &a.subst(&asg).unwrap() * &b.subst(&asg).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn exact_division_inverts_product(a in arb_poly(), b in arb_poly()) {
            prop_assume!(!b.is_zero());
            prop_assert_eq!((&a * &b).exact_div(&b), Some(a));
        }
    }
}
