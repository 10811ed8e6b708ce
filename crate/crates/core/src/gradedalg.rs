//! Functions on `T*[1]R^n` and their degree -1 Poisson bracket.
//!
//! A [`GradedFunction`] maps odd monomials (bitmasks of strictly increasing
//! odd indices) to polynomial coefficients in the even coordinates. Degree 0
//! elements are functions, degree 1 elements are vector fields `X^i th_i`,
//! degree 2 elements are bivectors.
//!
//! The bracket is the Schouten bracket with the sign convention fixed by
//! these calibration identities:
//!
//! * `{X, f} = X(f)` and `{f, X} = -X(f)`,
//! * `{X, Y} = [X, Y]`,
//! * `{S, f}` is the Hamiltonian vector field `pi(df, .)`,
//! * `{{S, f}, g} = pi(df, dg)`,
//!
//! where `S = sum_{i<j} pi^{ij} th_i th_j`. Writing
//! `B(a, b) = sum_i (a d/dth_i)(db/dx_i) - (da/dx_i)(d/dth_i b)`
//! with right and left odd derivatives, the bracket of homogeneous
//! elements is `{a, b} = (-1)^{(|a|-1)(|b|-1)} B(a, b)`. It is graded skew
//! and satisfies the graded Jacobi identity with degrees shifted by one; its
//! Leibniz rule reads `{a, bc} = (-1)^{(|a|-1)|c|} {a, b} c + b {a, c}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::exactpoly::{format_monomial, PolyError, Polynomial, Rational, Vars};
use crate::expr::{self, Evaluator};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GradedError {
    #[error("graded context mismatch")]
    ContextMismatch,
    #[error("expected degree {expected}, found {found}")]
    Degree { expected: usize, found: String },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Even coordinate names paired one-to-one with odd coordinate names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedContext {
    even: Vars,
    odd: Arc<[String]>,
}

impl GradedContext {
    /// Odd names default to `th1..thn`.
    pub fn new(even: &[&str]) -> Self {
        let odd: Vec<String> = (1..=even.len()).map(|i| format!("th{i}")).collect();
        Self::from_names(even.iter().map(|s| s.to_string()).collect(), odd)
    }

    pub fn with_odd(even: &[&str], odd: &[&str]) -> Self {
        Self::from_names(
            even.iter().map(|s| s.to_string()).collect(),
            odd.iter().map(|s| s.to_string()).collect(),
        )
    }

    pub fn from_names(even: Vec<String>, odd: Vec<String>) -> Self {
        assert_eq!(
            even.len(),
            odd.len(),
            "every even coordinate needs an odd partner"
        );
        assert!(even.len() < 64, "at most 63 coordinates");
        GradedContext {
            even: even.into(),
            odd: odd.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.even.len()
    }

    pub fn even(&self) -> &Vars {
        &self.even
    }

    pub fn odd(&self) -> &[String] {
        &self.odd
    }

    pub fn even_index(&self, name: &str) -> Option<usize> {
        self.even.iter().position(|v| v == name)
    }

    pub fn odd_index(&self, name: &str) -> Option<usize> {
        self.odd.iter().position(|v| v == name)
    }

    fn same(&self, other: &GradedContext) -> bool {
        (Arc::ptr_eq(&self.even, &other.even) || self.even == other.even)
            && (Arc::ptr_eq(&self.odd, &other.odd) || self.odd == other.odd)
    }
}

/// Homogeneity of a graded function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degree {
    Zero,
    Homogeneous(usize),
    Mixed,
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::Zero => write!(f, "zero"),
            Degree::Homogeneous(k) => write!(f, "{k}"),
            Degree::Mixed => write!(f, "inhomogeneous"),
        }
    }
}

pub type OddMask = u64;

fn mask_indices(m: OddMask) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| m >> i & 1 == 1)
}

/// Sign of `th_a * th_b` relative to the sorted monomial `a | b`.
fn product_sign(a: OddMask, b: OddMask) -> bool {
    // Each i in a must pass every j in b with j < i.
    let mut swaps = 0u32;
    for i in mask_indices(a) {
        swaps += (b & ((1u64 << i) - 1)).count_ones();
    }
    swaps.is_multiple_of(2)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedFunction {
    ctx: GradedContext,
    terms: BTreeMap<OddMask, Polynomial>,
}

impl GradedFunction {
    pub fn zero(ctx: &GradedContext) -> Self {
        GradedFunction {
            ctx: ctx.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn from_poly(ctx: &GradedContext, p: Polynomial) -> Self {
        Self::term(ctx, 0, p)
    }

    pub fn constant(ctx: &GradedContext, c: Rational) -> Self {
        Self::from_poly(ctx, Polynomial::constant(ctx.even(), c))
    }

    pub fn one(ctx: &GradedContext) -> Self {
        Self::constant(ctx, Rational::one())
    }

    /// Coefficient times a sorted odd monomial.
    pub fn term(ctx: &GradedContext, mask: OddMask, coeff: Polynomial) -> Self {
        let mut f = Self::zero(ctx);
        f.add_term(mask, coeff);
        f
    }

    pub fn even_var(ctx: &GradedContext, i: usize) -> Self {
        Self::from_poly(ctx, Polynomial::var(ctx.even(), i))
    }

    pub fn theta(ctx: &GradedContext, i: usize) -> Self {
        Self::term(ctx, 1 << i, Polynomial::one(ctx.even()))
    }

    /// The vector field `sum_i c_i d/dx_i`.
    pub fn vector_field(ctx: &GradedContext, coeffs: &[Polynomial]) -> Self {
        let mut f = Self::zero(ctx);
        for (i, c) in coeffs.iter().enumerate() {
            f.add_term(1 << i, c.clone());
        }
        f
    }

    pub fn parse(src: &str, ctx: &GradedContext) -> Result<Self, GradedError> {
        let e = expr::parse(src)?;
        Ok(expr::evaluate(&GradedEval(ctx.clone()), &e)?)
    }

    pub fn context(&self) -> &GradedContext {
        &self.ctx
    }

    pub fn terms(&self) -> impl Iterator<Item = (OddMask, &Polynomial)> {
        self.terms.iter().map(|(m, p)| (*m, p))
    }

    pub fn coefficient(&self, mask: OddMask) -> Polynomial {
        self.terms
            .get(&mask)
            .cloned()
            .unwrap_or_else(|| Polynomial::zero(self.ctx.even()))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Degree {
        let mut degs = self.terms.keys().map(|m| m.count_ones() as usize);
        match degs.next() {
            None => Degree::Zero,
            Some(d) => {
                if degs.all(|e| e == d) {
                    Degree::Homogeneous(d)
                } else {
                    Degree::Mixed
                }
            }
        }
    }

    /// Accepts zero or a homogeneous element of degree `k`.
    pub fn expect_degree(&self, k: usize) -> Result<(), GradedError> {
        match self.degree() {
            Degree::Zero => Ok(()),
            Degree::Homogeneous(d) if d == k => Ok(()),
            other => Err(GradedError::Degree {
                expected: k,
                found: other.to_string(),
            }),
        }
    }

    /// Splits into homogeneous components keyed by degree.
    pub fn components(&self) -> BTreeMap<usize, GradedFunction> {
        let mut out: BTreeMap<usize, GradedFunction> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.count_ones() as usize)
                .or_insert_with(|| GradedFunction::zero(&self.ctx))
                .terms
                .insert(*m, c.clone());
        }
        out
    }

    pub fn component(&self, k: usize) -> GradedFunction {
        GradedFunction {
            ctx: self.ctx.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.count_ones() as usize == k)
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    /// Degree-0 part as a polynomial.
    pub fn body(&self) -> Polynomial {
        self.coefficient(0)
    }

    /// Coefficients `X^i` of a degree-1 element.
    pub fn vector_components(&self) -> Result<Vec<Polynomial>, GradedError> {
        self.expect_degree(1)?;
        Ok((0..self.ctx.dim())
            .map(|i| self.coefficient(1 << i))
            .collect())
    }

    fn add_term(&mut self, mask: OddMask, c: Polynomial) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&mask) {
            Some(old) => {
                let s = &old + &c;
                if !s.is_zero() {
                    self.terms.insert(mask, s);
                }
            }
            None => {
                self.terms.insert(mask, c);
            }
        }
    }

    fn check(&self, other: &GradedFunction) -> Result<(), GradedError> {
        if self.ctx.same(&other.ctx) {
            Ok(())
        } else {
            Err(GradedError::ContextMismatch)
        }
    }

    pub fn try_add(&self, other: &GradedFunction) -> Result<GradedFunction, GradedError> {
        self.check(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c.clone());
        }
        Ok(out)
    }

    /// Graded-commutative product.
    pub fn try_mul(&self, other: &GradedFunction) -> Result<GradedFunction, GradedError> {
        self.check(other)?;
        let mut out = GradedFunction::zero(&self.ctx);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let c = ca * cb;
                out.add_term(ma | mb, if product_sign(*ma, *mb) { c } else { -c });
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Rational) -> GradedFunction {
        self.map_coeffs(|p| p.scale(c))
    }

    /// Multiply by a degree-0 polynomial.
    pub fn mul_poly(&self, p: &Polynomial) -> GradedFunction {
        self.map_coeffs(|c| c * p)
    }

    fn map_coeffs(&self, mut f: impl FnMut(&Polynomial) -> Polynomial) -> GradedFunction {
        let mut out = GradedFunction::zero(&self.ctx);
        for (m, c) in &self.terms {
            out.add_term(*m, f(c));
        }
        out
    }

    pub fn diff_even(&self, i: usize) -> GradedFunction {
        self.map_coeffs(|c| c.diff_index(i))
    }

    /// Derivative by `th_i` acting from the right.
    pub fn right_odd_deriv(&self, i: usize) -> GradedFunction {
        let bit = 1u64 << i;
        let mut out = GradedFunction::zero(&self.ctx);
        for (m, c) in &self.terms {
            if m & bit == 0 {
                continue;
            }
            let after = (m >> (i + 1)).count_ones();
            out.add_term(
                m & !bit,
                if after.is_multiple_of(2) {
                    c.clone()
                } else {
                    -c
                },
            );
        }
        out
    }

    /// Derivative by `th_i` acting from the left.
    pub fn left_odd_deriv(&self, i: usize) -> GradedFunction {
        let bit = 1u64 << i;
        let mut out = GradedFunction::zero(&self.ctx);
        for (m, c) in &self.terms {
            if m & bit == 0 {
                continue;
            }
            let before = (m & (bit - 1)).count_ones();
            out.add_term(
                m & !bit,
                if before.is_multiple_of(2) {
                    c.clone()
                } else {
                    -c
                },
            );
        }
        out
    }

    /// Substitutes polynomials for even coordinates in every coefficient.
    pub fn subst_even(
        &self,
        by_index: &BTreeMap<usize, &Polynomial>,
    ) -> Result<GradedFunction, GradedError> {
        let mut out = GradedFunction::zero(&self.ctx);
        for (m, c) in &self.terms {
            out.add_term(*m, c.subst_indexed(by_index)?);
        }
        Ok(out)
    }

    /// Replaces odd generators by the given graded functions, multiplying out
    /// each monomial in increasing index order.
    pub fn subst_odd(&self, images: &BTreeMap<usize, GradedFunction>) -> GradedFunction {
        if images.is_empty() {
            return self.clone();
        }
        let mut out = GradedFunction::zero(&self.ctx);
        for (m, c) in &self.terms {
            let mut acc = GradedFunction::from_poly(&self.ctx, c.clone());
            for i in mask_indices(*m) {
                let factor = images
                    .get(&i)
                    .cloned()
                    .unwrap_or_else(|| GradedFunction::theta(&self.ctx, i));
                acc = &acc * &factor;
                if acc.is_zero() {
                    break;
                }
            }
            out = &out + &acc;
        }
        out
    }

    /// Re-express in another context, matching even and odd names.
    pub fn embed(&self, target: &GradedContext) -> Result<GradedFunction, GradedError> {
        let mut out = GradedFunction::zero(target);
        for (m, c) in &self.terms {
            let mut new_mask = 0u64;
            let mut sign = true;
            let mut placed: Vec<usize> = Vec::new();
            for i in mask_indices(*m) {
                let name = &self.ctx.odd[i];
                let j = target
                    .odd_index(name)
                    .ok_or_else(|| PolyError::UnknownVariable(name.clone()))?;
                // Count already placed indices greater than j to reorder.
                let inversions = placed.iter().filter(|&&k| k > j).count();
                if inversions % 2 == 1 {
                    sign = !sign;
                }
                placed.push(j);
                new_mask |= 1 << j;
            }
            let c = c.embed(target.even())?;
            out.add_term(new_mask, if sign { c } else { -c });
        }
        Ok(out)
    }

    /// Applies a vector field to a function: `X(f) = X^i df/dx_i`.
    pub fn apply_vector_field(
        x: &GradedFunction,
        f: &Polynomial,
    ) -> Result<Polynomial, GradedError> {
        let comps = x.vector_components()?;
        let mut acc = Polynomial::zero(x.ctx.even());
        for (i, c) in comps.iter().enumerate() {
            acc = &acc + &(c * &f.diff_index(i));
        }
        Ok(acc)
    }

    pub fn eval_coeffs(&self, point: &[Rational]) -> BTreeMap<OddMask, Rational> {
        self.terms
            .iter()
            .map(|(m, c)| (*m, c.eval(point)))
            .filter(|(_, v)| !v.is_zero())
            .collect()
    }
}

/// The untwisted bidifferential operator `B(a, b)`.
fn raw_bracket(a: &GradedFunction, b: &GradedFunction) -> GradedFunction {
    let mut out = GradedFunction::zero(&a.ctx);
    for i in 0..a.ctx.dim() {
        let ra = a.right_odd_deriv(i);
        if !ra.is_zero() {
            let db = b.diff_even(i);
            if !db.is_zero() {
                out = &out + &(&ra * &db);
            }
        }
        let da = a.diff_even(i);
        if !da.is_zero() {
            let lb = b.left_odd_deriv(i);
            if !lb.is_zero() {
                out = &out - &(&da * &lb);
            }
        }
    }
    out
}

/// The degree -1 Schouten bracket, extended bilinearly over homogeneous
/// components.
pub fn schouten_bracket(
    a: &GradedFunction,
    b: &GradedFunction,
) -> Result<GradedFunction, GradedError> {
    a.check(b)?;
    let mut out = GradedFunction::zero(&a.ctx);
    for (p, ap) in a.components() {
        for (q, bq) in b.components() {
            let r = raw_bracket(&ap, &bq);
            // (p-1)(q-1) is odd iff p and q are both even.
            out = if p % 2 == 0 && q % 2 == 0 {
                &out - &r
            } else {
                &out + &r
            };
        }
    }
    Ok(out)
}

/// `{{S, f}, g}` for a degree-2 `S` and degree-0 `f`, `g`.
pub fn derived_bracket(
    s: &GradedFunction,
    f: &GradedFunction,
    g: &GradedFunction,
) -> Result<Polynomial, GradedError> {
    s.expect_degree(2)?;
    f.expect_degree(0)?;
    g.expect_degree(0)?;
    let inner = schouten_bracket(s, f)?;
    Ok(schouten_bracket(&inner, g)?.body())
}

/// Antisymmetric bivector stored by its upper triangle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoissonBivector {
    ctx: GradedContext,
    upper: BTreeMap<(usize, usize), Polynomial>,
}

impl PoissonBivector {
    pub fn zero(ctx: &GradedContext) -> Self {
        PoissonBivector {
            ctx: ctx.clone(),
            upper: BTreeMap::new(),
        }
    }

    /// Sets `pi^{ij}` (and implicitly `pi^{ji} = -pi^{ij}`).
    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) {
        assert!(
            i != j || p.is_zero(),
            "diagonal entries of a bivector vanish"
        );
        if i == j {
            return;
        }
        let (key, val) = if i < j { ((i, j), p) } else { ((j, i), -p) };
        if val.is_zero() {
            self.upper.remove(&key);
        } else {
            self.upper.insert(key, val);
        }
    }

    pub fn with(mut self, i: usize, j: usize, p: Polynomial) -> Self {
        self.set(i, j, p);
        self
    }

    pub fn get(&self, i: usize, j: usize) -> Polynomial {
        let z = || Polynomial::zero(self.ctx.even());
        if i < j {
            self.upper.get(&(i, j)).cloned().unwrap_or_else(z)
        } else if i > j {
            self.upper.get(&(j, i)).map(|p| -p).unwrap_or_else(z)
        } else {
            z()
        }
    }

    pub fn context(&self) -> &GradedContext {
        &self.ctx
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &Polynomial)> {
        self.upper.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_zero(&self) -> bool {
        self.upper.is_empty()
    }

    /// `S = sum_{i<j} pi^{ij} th_i th_j`.
    pub fn to_function(&self) -> GradedFunction {
        let mut s = GradedFunction::zero(&self.ctx);
        for ((i, j), p) in &self.upper {
            s.add_term((1 << i) | (1 << j), p.clone());
        }
        s
    }

    pub fn from_function(s: &GradedFunction) -> Result<Self, GradedError> {
        s.expect_degree(2)?;
        let mut pi = PoissonBivector::zero(&s.ctx);
        for (m, c) in &s.terms {
            let ix: Vec<usize> = mask_indices(*m).collect();
            pi.set(ix[0], ix[1], c.clone());
        }
        Ok(pi)
    }

    pub fn parse(src: &str, ctx: &GradedContext) -> Result<Self, GradedError> {
        Self::from_function(&GradedFunction::parse(src, ctx)?)
    }

    /// `pi(df, dg) = pi^{ij} df/dx_i dg/dx_j`.
    pub fn contract(&self, f: &Polynomial, g: &Polynomial) -> Polynomial {
        let n = self.ctx.dim();
        let df: Vec<Polynomial> = (0..n).map(|i| f.diff_index(i)).collect();
        let dg: Vec<Polynomial> = (0..n).map(|i| g.diff_index(i)).collect();
        self.contract_forms(&df, &dg)
    }

    /// Pairing with two 1-forms given by their components.
    pub fn contract_forms(&self, a: &[Polynomial], b: &[Polynomial]) -> Polynomial {
        let mut acc = Polynomial::zero(self.ctx.even());
        for ((i, j), p) in &self.upper {
            let t = &(&a[*i] * &b[*j]) - &(&a[*j] * &b[*i]);
            acc = &acc + &(p * &t);
        }
        acc
    }

    /// `pi(alpha, .)` as a vector field.
    pub fn sharp(&self, alpha: &[Polynomial]) -> GradedFunction {
        let n = self.ctx.dim();
        let comps: Vec<Polynomial> = (0..n)
            .map(|j| {
                let mut acc = Polynomial::zero(self.ctx.even());
                for (i, a) in alpha.iter().enumerate() {
                    acc = &acc + &(a * &self.get(i, j));
                }
                acc
            })
            .collect();
        GradedFunction::vector_field(&self.ctx, &comps)
    }

    pub fn hamiltonian(&self, f: &Polynomial) -> GradedFunction {
        let df: Vec<Polynomial> = (0..self.ctx.dim()).map(|i| f.diff_index(i)).collect();
        self.sharp(&df)
    }

    /// Cyclic sum `{{x_i, x_j}, x_k} + {{x_j, x_k}, x_i} + {{x_k, x_i}, x_j}`.
    pub fn jacobiator(&self, i: usize, j: usize, k: usize) -> Polynomial {
        let x = |a: usize| Polynomial::var(self.ctx.even(), a);
        let term = |a: usize, b: usize, c: usize| self.contract(&self.get(a, b), &x(c));
        &(&term(i, j, k) + &term(j, k, i)) + &term(k, i, j)
    }

    pub fn embed(&self, target: &GradedContext) -> Result<Self, GradedError> {
        Self::from_function(&self.to_function().embed(target)?)
    }
}

impl fmt::Display for PoissonBivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_function(), f)
    }
}

/// `{S, S}`; zero exactly when `pi` is Poisson.
pub fn jacobi_defect(pi: &PoissonBivector) -> GradedFunction {
    let s = pi.to_function();
    schouten_bracket(&s, &s).expect("same context")
}

/// The degree-2 function of `L_X pi`, i.e. `-{S, X}`.
pub fn lie_derivative_bivector(
    x: &GradedFunction,
    pi: &PoissonBivector,
) -> Result<GradedFunction, GradedError> {
    x.expect_degree(1)?;
    Ok(-schouten_bracket(&pi.to_function(), x)?)
}

/// Vector field commutator computed from components, as an oracle.
pub fn lie_bracket_fields(x: &[Polynomial], y: &[Polynomial]) -> Vec<Polynomial> {
    let n = x.len();
    (0..n)
        .map(|j| {
            let mut acc = Polynomial::zero(x[0].vars());
            for i in 0..n {
                acc = &acc + &(&(&x[i] * &y[j].diff_index(i)) - &(&y[i] * &x[j].diff_index(i)));
            }
            acc
        })
        .collect()
}

impl fmt::Display for GradedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut keys: Vec<&OddMask> = self.terms.keys().collect();
        keys.sort_by_key(|m| (m.count_ones(), m.reverse_bits()));
        keys.reverse();
        let mut first = true;
        for m in keys {
            let c = &self.terms[m];
            let odd: Vec<&str> = mask_indices(*m).map(|i| self.ctx.odd[i].as_str()).collect();
            let odd = odd.join("*");
            let (neg, body) = coefficient_text(c);
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            first = false;
            match (body.as_str(), odd.is_empty()) {
                ("1", false) => write!(f, "{odd}")?,
                (_, true) => write!(f, "{body}")?,
                _ => write!(f, "{body}*{odd}")?,
            }
        }
        Ok(())
    }
}

/// Sign and text of a coefficient, parenthesised when it has several terms.
fn coefficient_text(c: &Polynomial) -> (bool, String) {
    if c.num_terms() == 1 {
        let (m, v) = c.terms().next().expect("one term");
        let neg = v < &Rational::zero();
        let a = if neg { -v.clone() } else { v.clone() };
        let mono = format_monomial(c.vars(), m);
        let text = match (mono.is_empty(), a.is_one()) {
            (true, _) => a.to_string(),
            (false, true) => mono,
            (false, false) => format!("{a}*{mono}"),
        };
        (neg, text)
    } else {
        (false, format!("({c})"))
    }
}

macro_rules! graded_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl std::ops::$tr<&GradedFunction> for &GradedFunction {
            type Output = GradedFunction;
            fn $method(self, rhs: &GradedFunction) -> GradedFunction {
                let f: fn(&GradedFunction, &GradedFunction) -> Result<GradedFunction, GradedError> =
                    $body;
                f(self, rhs).expect("graded operands must share a context")
            }
        }
        impl std::ops::$tr<GradedFunction> for GradedFunction {
            type Output = GradedFunction;
            fn $method(self, rhs: GradedFunction) -> GradedFunction {
                std::ops::$tr::$method(&self, &rhs)
            }
        }
    };
}

graded_binop!(Add, add, |a, b| a.try_add(b));
graded_binop!(Sub, sub, |a, b| a.try_add(&-b));
graded_binop!(Mul, mul, |a, b| a.try_mul(b));

impl std::ops::Neg for &GradedFunction {
    type Output = GradedFunction;
    fn neg(self) -> GradedFunction {
        self.map_coeffs(|c| -c)
    }
}

impl std::ops::Neg for GradedFunction {
    type Output = GradedFunction;
    fn neg(self) -> GradedFunction {
        -&self
    }
}

struct GradedEval(GradedContext);

impl Evaluator for GradedEval {
    type Elem = GradedFunction;
    fn constant(&self, c: Rational) -> GradedFunction {
        GradedFunction::constant(&self.0, c)
    }
    fn symbol(&self, name: &str) -> Option<GradedFunction> {
        if let Some(i) = self.0.even_index(name) {
            Some(GradedFunction::even_var(&self.0, i))
        } else {
            self.0
                .odd_index(name)
                .map(|i| GradedFunction::theta(&self.0, i))
        }
    }
    fn add(&self, a: &GradedFunction, b: &GradedFunction) -> GradedFunction {
        a + b
    }
    fn mul(&self, a: &GradedFunction, b: &GradedFunction) -> GradedFunction {
        a * b
    }
    fn neg(&self, a: &GradedFunction) -> GradedFunction {
        -a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactpoly::int;
    use crate::sample;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx4() -> GradedContext {
        GradedContext::new(&["x1", "x2", "x3", "x4"])
    }

    fn g(s: &str) -> GradedFunction {
        GradedFunction::parse(s, &ctx4()).unwrap()
    }

    fn br(a: &GradedFunction, b: &GradedFunction) -> GradedFunction {
        schouten_bracket(a, b).unwrap()
    }

    /// Bubble-sorts a word of odd indices, counting transpositions.
    fn naive_sign(word: &[usize]) -> Option<bool> {
        let mut w = word.to_vec();
        let mut swaps = 0;
        for i in 0..w.len() {
            for j in 0..w.len() - 1 - i {
                if w[j] == w[j + 1] {
                    return None;
                }
                if w[j] > w[j + 1] {
                    w.swap(j, j + 1);
                    swaps += 1;
                }
            }
        }
        if w.windows(2).any(|p| p[0] == p[1]) {
            return None;
        }
        Some(swaps % 2 == 0)
    }

    #[test]
    fn anticommutation() {
        assert_eq!(&g("th1") * &g("th2"), g("th1*th2"));
        assert_eq!(&g("th2") * &g("th1"), -g("th1*th2"));
        assert!((&g("th1") * &g("th1")).is_zero());
        assert_eq!(&g("x1*th3") * &g("th2"), -g("x1*th2*th3"));
    }

    #[test]
    fn product_sign_matches_naive_oracle() {
        for a in 0u64..16 {
            for b in 0u64..16 {
                let word: Vec<usize> = mask_indices(a).chain(mask_indices(b)).collect();
                match naive_sign(&word) {
                    None => assert_ne!(a & b, 0),
                    Some(s) => assert_eq!(product_sign(a, b), s, "{a:b} {b:b}"),
                }
            }
        }
    }

    #[test]
    fn calibration_anchors() {
        assert_eq!(br(&g("th1"), &g("x1")), g("1"));
        assert_eq!(br(&g("x1"), &g("th1")), g("-1"));
        assert!(br(&g("x1^2"), &g("x2*x3")).is_zero());
        // {X, f} = X(f)
        let x = g("x2*th1 + x1^2*th3");
        let f = Polynomial::parse("x1*x3 + x2^2", ctx4().even()).unwrap();
        let xf = GradedFunction::apply_vector_field(&x, &f).unwrap();
        let fg = GradedFunction::from_poly(&ctx4(), f.clone());
        assert_eq!(br(&x, &fg).body(), xf);
        assert_eq!(br(&fg, &x).body(), -xf);
        // {X, Y} = [X, Y]
        let y = g("x3*th2 + th4");
        let expected = lie_bracket_fields(
            &x.vector_components().unwrap(),
            &y.vector_components().unwrap(),
        );
        assert_eq!(br(&x, &y), GradedFunction::vector_field(&ctx4(), &expected));
    }

    #[test]
    fn hamiltonian_and_derived_bracket() {
        let s = g("th1*th2");
        let pi = PoissonBivector::from_function(&s).unwrap();
        assert_eq!(br(&s, &g("x1")), g("th2"));
        let f = g("x1");
        let h = g("x2");
        assert_eq!(
            derived_bracket(&s, &f, &h).unwrap(),
            pi.contract(&f.body(), &h.body())
        );
        assert_eq!(derived_bracket(&s, &f, &h).unwrap().constant_term(), int(1));
        assert!(derived_bracket(&s, &f, &f).unwrap().is_zero());
        assert!(derived_bracket(&g("th1"), &f, &h).is_err());
    }

    #[test]
    fn counterexample_brackets() {
        // alpha = alpha(x1, x2, x3), here x1*x3 + x2^2 + x1.
        let s = g("th1*th2 + th3*th4");
        assert!(br(&s, &s).is_zero());
        let alpha = "(x1*x3 + x2^2 + x1)";
        let gen = g(&format!("th4 + {alpha}*th1"));
        let expected = g("-((x3 + 1)*th2 + x1*th4)*th1");
        assert_eq!(br(&s, &gen), expected);
        let sp = g(&format!("th1*(th2 + {alpha}*th3)"));
        assert_eq!(br(&sp, &sp), g("-2*(x3 + 1)*th1*th2*th3"));
    }

    #[test]
    fn defect_matches_scalar_jacobiator() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ctx = ctx4();
        for _ in 0..20 {
            let pi = sample::random_bivector(&mut rng, &ctx, 2, 2);
            let d = jacobi_defect(&pi);
            for i in 0..4 {
                for j in i + 1..4 {
                    for k in j + 1..4 {
                        let mask = (1 << i) | (1 << j) | (1 << k);
                        assert_eq!(d.coefficient(mask), pi.jacobiator(i, j, k).scale(&int(2)));
                    }
                }
            }
            let zero_jac =
                (0..4).all(|i| (0..4).all(|j| (0..4).all(|k| pi.jacobiator(i, j, k).is_zero())));
            assert_eq!(d.is_zero(), zero_jac);
        }
    }

    #[test]
    fn linear_bivector_from_lie_algebra_is_poisson() {
        // so(3): {x1, x2} = x3 and cyclic.
        let ctx = GradedContext::new(&["x1", "x2", "x3"]);
        let pi = PoissonBivector::parse("x3*th1*th2 + x1*th2*th3 + x2*th3*th1", &ctx).unwrap();
        assert!(jacobi_defect(&pi).is_zero());
        let broken = pi
            .clone()
            .with(0, 1, Polynomial::parse("x3 + x1", ctx.even()).unwrap());
        assert!(!jacobi_defect(&broken).is_zero());
    }

    #[test]
    fn lie_derivative_two_ways() {
        let ctx = GradedContext::new(&["x1", "x2"]);
        let pi = PoissonBivector::parse("th1*th2", &ctx).unwrap();
        let x = GradedFunction::parse("x1*th2", &ctx).unwrap();
        // (L_X pi)^{ij} = X(pi^{ij}) - pi^{kj} dX^i/dx_k - pi^{ik} dX^j/dx_k
        let xs = x.vector_components().unwrap();
        let mut direct = PoissonBivector::zero(&ctx);
        for i in 0..2 {
            for j in i + 1..2 {
                let mut v = GradedFunction::apply_vector_field(&x, &pi.get(i, j)).unwrap();
                for k in 0..2 {
                    v = &v - &(&pi.get(k, j) * &xs[i].diff_index(k));
                    v = &v - &(&pi.get(i, k) * &xs[j].diff_index(k));
                }
                direct.set(i, j, v);
            }
        }
        assert_eq!(
            lie_derivative_bivector(&x, &pi).unwrap(),
            direct.to_function()
        );
        let c = GradedFunction::parse("th1", &ctx).unwrap();
        assert!(lie_derivative_bivector(&c, &pi).unwrap().is_zero());
    }

    #[test]
    fn bivector_dictionary_roundtrip() {
        let pi = PoissonBivector::parse(
            "x1*th1*th2 - th3*th1",
            &GradedContext::new(&["x1", "x2", "x3"]),
        )
        .unwrap();
        // -th3*th1 = th1*th3
        assert_eq!(pi.get(0, 2), Polynomial::one(pi.context().even()));
        assert_eq!(pi.get(2, 0), -Polynomial::one(pi.context().even()));
        assert_eq!(
            PoissonBivector::from_function(&pi.to_function()).unwrap(),
            pi
        );
    }

    #[test]
    fn display_roundtrip() {
        let f = g("3/2*x1*th2*th1 - (x1 + x2)*th3 + 5 - th4*th2*th1");
        let text = f.to_string();
        assert_eq!(GradedFunction::parse(&text, &ctx4()).unwrap(), f);
        assert_eq!(g("th1*th2").to_string(), "th1*th2");
    }

    #[test]
    fn embed_reorders_odd_names() {
        let small = GradedContext::with_odd(&["a", "b"], &["ta", "tb"]);
        let big = GradedContext::with_odd(&["b", "c", "a"], &["tb", "tc", "ta"]);
        let f = GradedFunction::parse("a*ta*tb", &small).unwrap();
        assert_eq!(
            f.embed(&big).unwrap(),
            GradedFunction::parse("-a*tb*ta", &big).unwrap()
        );
    }

    #[test]
    fn degree_queries() {
        assert_eq!(g("th1 + x1*th2").degree(), Degree::Homogeneous(1));
        assert_eq!(g("th1 + x1").degree(), Degree::Mixed);
        assert_eq!(g("0").degree(), Degree::Zero);
        assert!(g("th1 + x1").expect_degree(1).is_err());
    }

    fn sign(p: usize, q: usize) -> Rational {
        if (p * q).is_multiple_of(2) {
            int(1)
        } else {
            int(-1)
        }
    }

    fn arb_homogeneous() -> impl Strategy<Value = (GradedFunction, usize)> {
        (any::<u64>(), 0usize..4).prop_map(|(seed, deg)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ctx = GradedContext::new(&["x1", "x2", "x3"]);
            (sample::random_homogeneous(&mut rng, &ctx, deg, 2, 3), deg)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn graded_commutativity((a, p) in arb_homogeneous(), (b, q) in arb_homogeneous()) {
            prop_assert_eq!(&a * &b, (&b * &a).scale(&sign(p, q)));
        }

        #[test]
        fn graded_skew_symmetry((a, p) in arb_homogeneous(), (b, q) in arb_homogeneous()) {
            let lhs = br(&a, &b);
            let rhs = -br(&b, &a).scale(&sign(p + 1, q + 1));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn graded_jacobi((a, p) in arb_homogeneous(), (b, q) in arb_homogeneous(), (c, _) in arb_homogeneous()) {
            let lhs = br(&a, &br(&b, &c));
            let rhs = &br(&br(&a, &b), &c) + &br(&b, &br(&a, &c)).scale(&sign(p + 1, q + 1));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn leibniz((a, p) in arb_homogeneous(), (b, _) in arb_homogeneous(), (c, r) in arb_homogeneous()) {
            let lhs = br(&a, &(&b * &c));
            let rhs = &(&br(&a, &b) * &c).scale(&sign(p + 1, r)) + &(&b * &br(&a, &c));
            prop_assert_eq!(lhs, rhs);
        }
    }
}
