//! Seeded random inputs: small-height rationals, sample points and random
//! polynomial or graded data for property checks and rank probes.

use rand::Rng;

use crate::exactpoly::{rat, Monomial, Polynomial, Rational, Vars};
use crate::gradedalg::{GradedContext, GradedFunction, PoissonBivector};

/// Rational `n/d` with `|n| <= 9` and `1 <= d <= 4`.
pub fn small_rational<R: Rng + ?Sized>(rng: &mut R) -> Rational {
    rat(rng.random_range(-9..=9), rng.random_range(1..=4))
}

pub fn random_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Rational> {
    (0..n).map(|_| small_rational(rng)).collect()
}

/// Up to `max_terms` terms of total degree at most `max_degree`, with small
/// integer coefficients.
pub fn random_polynomial<R: Rng + ?Sized>(
    rng: &mut R,
    vars: &Vars,
    max_degree: u32,
    max_terms: usize,
) -> Polynomial {
    let n = vars.len();
    let count = rng.random_range(0..=max_terms);
    let terms = (0..count).map(|_| {
        let mut e = vec![0u32; n];
        let deg = rng.random_range(0..=max_degree);
        for _ in 0..deg {
            if n > 0 {
                e[rng.random_range(0..n)] += 1;
            }
        }
        (Monomial(e), rat(rng.random_range(-4..=4), 1))
    });
    Polynomial::from_terms(vars, terms.collect::<Vec<_>>())
}

/// Homogeneous element of the given odd degree over a few odd monomials.
pub fn random_homogeneous<R: Rng + ?Sized>(
    rng: &mut R,
    ctx: &GradedContext,
    degree: usize,
    max_poly_degree: u32,
    max_terms: usize,
) -> GradedFunction {
    let n = ctx.dim();
    let masks: Vec<u64> = (0u64..1 << n)
        .filter(|m| m.count_ones() as usize == degree)
        .collect();
    let mut out = GradedFunction::zero(ctx);
    if masks.is_empty() {
        return out;
    }
    for _ in 0..rng.random_range(1..=3) {
        let m = masks[rng.random_range(0..masks.len())];
        let c = random_polynomial(rng, ctx.even(), max_poly_degree, max_terms);
        out = &out + &GradedFunction::term(ctx, m, c);
    }
    out
}

pub fn random_vector_field<R: Rng + ?Sized>(
    rng: &mut R,
    ctx: &GradedContext,
    max_degree: u32,
    max_terms: usize,
) -> GradedFunction {
    let comps: Vec<Polynomial> = (0..ctx.dim())
        .map(|_| random_polynomial(rng, ctx.even(), max_degree, max_terms))
        .collect();
    GradedFunction::vector_field(ctx, &comps)
}

pub fn random_bivector<R: Rng + ?Sized>(
    rng: &mut R,
    ctx: &GradedContext,
    max_degree: u32,
    max_terms: usize,
) -> PoissonBivector {
    let mut pi = PoissonBivector::zero(ctx);
    for i in 0..ctx.dim() {
        for j in i + 1..ctx.dim() {
            pi.set(
                i,
                j,
                random_polynomial(rng, ctx.even(), max_degree, max_terms),
            );
        }
    }
    pi
}
