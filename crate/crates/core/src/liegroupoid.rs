//! Numeric realization of the global picture: crossed modules of groups,
//! the 2-group acting on the pair groupoid `M x M` of a symplectic vector
//! space, and quotients of that action.
//!
//! Points of `M x M` are written `(target, source)`. Coordinates of the
//! pair groupoid are `x1..xn` on the target factor and `y1..yn` on the
//! source factor. The groupoid bivector carries `-pi` on the target and
//! `+pi` on the source, which is the sign under which the diagonal lift of a
//! hamiltonian field of `f` is hamiltonian for `s*f - t*f`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dgla::{dgla_to_crossed_module, ActionData, DGLASpec, DglaError};
use crate::exactpoly::{int, rat_to_f64, Monomial, Polynomial, Rational};
use crate::gradedalg::{schouten_bracket, GradedContext, GradedFunction, PoissonBivector};
use crate::linalg::{self, RatMatrix};
use crate::reduction::{check_coisotropic, ReductionError, ReductionOptions, ReductionReport};
use crate::subman::{SubmanError, SubmanifoldSpec};
use crate::verdict::VerdictEntry;

pub const GROUP_TOLERANCE: f64 = 1e-10;
pub const RK4_LOCAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupoidError {
    #[error(
        "arrows are not composable: source {source_point:?} differs from target {target_point:?}"
    )]
    NotComposable {
        source_point: Vec<f64>,
        target_point: Vec<f64>,
    },
    #[error("flow integration failed: {0}")]
    Flow(String),
    #[error("bivector is not symplectic with constant coefficients")]
    NotSymplectic,
    #[error("vector field {0} is not hamiltonian")]
    NotHamiltonian(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Dgla(#[from] DglaError),
    #[error(transparent)]
    Subman(#[from] SubmanError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

fn renamed(mut e: VerdictEntry, id: &str) -> VerdictEntry {
    e.id = id.to_string();
    e
}

pub type Map1 = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type Map2 = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| x * c).collect()
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

/// A Lie group given by explicit maps on flat coordinate vectors.
#[derive(Clone)]
pub struct GroupRealization {
    pub arity: usize,
    pub algebra_dim: usize,
    pub identity: Vec<f64>,
    pub mul: Map2,
    pub inv: Map1,
    pub exp: Map1,
    /// Elements are algebra vectors and the product is addition.
    pub additive: bool,
}

impl std::fmt::Debug for GroupRealization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroupRealization")
            .field("arity", &self.arity)
            .field("algebra_dim", &self.algebra_dim)
            .field("additive", &self.additive)
            .finish()
    }
}

impl GroupRealization {
    /// `(R^k, +)`.
    pub fn vector(k: usize) -> Self {
        GroupRealization {
            arity: k,
            algebra_dim: k,
            identity: vec![0.0; k],
            mul: Arc::new(add),
            inv: Arc::new(|a| scale(a, -1.0)),
            exp: Arc::new(|v| v.to_vec()),
            additive: true,
        }
    }

    /// `n x n` matrices stored row-major, with a supplied exponential.
    pub fn matrix(n: usize, algebra_dim: usize, exp: Map1) -> Self {
        let to_m = move |a: &[f64]| DMatrix::from_row_slice(n, n, a);
        let from_m = |m: DMatrix<f64>| m.transpose().as_slice().to_vec();
        GroupRealization {
            arity: n * n,
            algebra_dim,
            identity: from_m(DMatrix::identity(n, n)),
            mul: Arc::new(move |a, b| from_m(to_m(a) * to_m(b))),
            inv: Arc::new(move |a| {
                from_m(
                    to_m(a)
                        .try_inverse()
                        .expect("group elements are invertible"),
                )
            }),
            exp,
            additive: false,
        }
    }

    pub fn random_element(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (self.exp)(&uniform_vec(rng, self.algebra_dim, 1.0))
    }

    /// Group axioms on exponentials of random algebra elements.
    pub fn audit(&self, samples: usize, seed: u64) -> VerdictEntry {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dev = max_abs_diff(&(self.exp)(&vec![0.0; self.algebra_dim]), &self.identity);
        for _ in 0..samples {
            let (a, b, c) = (
                self.random_element(&mut rng),
                self.random_element(&mut rng),
                self.random_element(&mut rng),
            );
            let left = (self.mul)(&(self.mul)(&a, &b), &c);
            let right = (self.mul)(&a, &(self.mul)(&b, &c));
            dev = dev
                .max(max_abs_diff(&left, &right))
                .max(max_abs_diff(&(self.mul)(&a, &self.identity), &a))
                .max(max_abs_diff(
                    &(self.mul)(&a, &(self.inv)(&a)),
                    &self.identity,
                ));
        }
        deviation_entry("group_axioms", dev, GROUP_TOLERANCE)
    }
}

fn deviation_entry(id: &str, dev: f64, tol: f64) -> VerdictEntry {
    if dev <= tol {
        VerdictEntry::pass(id)
    } else {
        VerdictEntry::fail(id, format!("max deviation {dev:.3e} exceeds {tol:.0e}"))
    }
}

/// Crossed module of groups `partial: H -> G` with `G` acting on `H`.
#[derive(Clone, Debug)]
pub struct CrossedModuleGroups {
    pub h: GroupRealization,
    pub g: GroupRealization,
    pub partial: Map1Debug,
    pub phi: Map2Debug,
}

/// Wrappers so realizations can derive `Debug`.
#[derive(Clone)]
pub struct Map1Debug(pub Map1);
#[derive(Clone)]
pub struct Map2Debug(pub Map2);

impl std::fmt::Debug for Map1Debug {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("<map>")
    }
}

impl std::fmt::Debug for Map2Debug {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("<map>")
    }
}

fn to_dmatrix(m: &RatMatrix, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |r, c| rat_to_f64(&m[r][c]))
}

impl CrossedModuleGroups {
    pub fn new(h: GroupRealization, g: GroupRealization, partial: Map1, phi: Map2) -> Self {
        CrossedModuleGroups {
            h,
            g,
            partial: Map1Debug(partial),
            phi: Map2Debug(phi),
        }
    }

    /// Integrates an audited spec with abelian `g` and abelian `h` to vector
    /// groups: `partial` is `delta` and `G` acts by `exp(lambda(g))`.
    pub fn vector_groups(spec: &DGLASpec) -> Result<Self, GroupoidError> {
        let cm = dgla_to_crossed_module(spec)?;
        let nonzero =
            |c: &crate::dgla::Constants| c.iter().flatten().flatten().any(|v| *v != int(0));
        if nonzero(&cm.lie_g) || nonzero(&cm.lie_h) {
            return Err(GroupoidError::Unsupported(
                "vector-group realization needs abelian g and h".into(),
            ));
        }
        let (ng, nh) = (spec.dim_g, spec.dim_h);
        let delta = to_dmatrix(&spec.delta, ng, nh);
        let lambdas: Vec<DMatrix<f64>> = (0..ng)
            .map(|i| DMatrix::from_fn(nh, nh, |b, a| rat_to_f64(&spec.bracket_gh[i][a][b])))
            .collect();
        let partial: Map1 =
            Arc::new(move |h| (&delta * DVector::from_column_slice(h)).as_slice().to_vec());
        let phi: Map2 = Arc::new(move |g, h| {
            let gen = g
                .iter()
                .zip(&lambdas)
                .fold(DMatrix::zeros(nh, nh), |acc, (c, l)| acc + l * *c);
            (gen.exp() * DVector::from_column_slice(h))
                .as_slice()
                .to_vec()
        });
        Ok(CrossedModuleGroups::new(
            GroupRealization::vector(nh),
            GroupRealization::vector(ng),
            partial,
            phi,
        ))
    }

    fn partial(&self, h: &[f64]) -> Vec<f64> {
        (self.partial.0)(h)
    }

    fn phi(&self, g: &[f64], h: &[f64]) -> Vec<f64> {
        (self.phi.0)(g, h)
    }

    /// Crossed-module axioms on sampled elements.
    pub fn audit(&self, samples: usize, seed: u64) -> Vec<VerdictEntry> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (hg, gg) = (&self.h, &self.g);
        let mut peiffer: f64 = 0.0;
        let mut equiv: f64 = 0.0;
        let mut automorphism: f64 = 0.0;
        let mut action: f64 = 0.0;
        let mut hom: f64 = 0.0;
        for _ in 0..samples {
            let (h1, h2) = (hg.random_element(&mut rng), hg.random_element(&mut rng));
            let (g1, g2) = (gg.random_element(&mut rng), gg.random_element(&mut rng));
            let conj = (hg.mul)(&(hg.mul)(&h1, &h2), &(hg.inv)(&h1));
            peiffer = peiffer.max(max_abs_diff(&self.phi(&self.partial(&h1), &h2), &conj));
            let gconj = (gg.mul)(&(gg.mul)(&g1, &self.partial(&h1)), &(gg.inv)(&g1));
            equiv = equiv.max(max_abs_diff(&self.partial(&self.phi(&g1, &h1)), &gconj));
            automorphism = automorphism.max(max_abs_diff(
                &self.phi(&g1, &(hg.mul)(&h1, &h2)),
                &(hg.mul)(&self.phi(&g1, &h1), &self.phi(&g1, &h2)),
            ));
            action = action.max(max_abs_diff(
                &self.phi(&(gg.mul)(&g1, &g2), &h1),
                &self.phi(&g1, &self.phi(&g2, &h1)),
            ));
            hom = hom.max(max_abs_diff(
                &self.partial(&(hg.mul)(&h1, &h2)),
                &(gg.mul)(&self.partial(&h1), &self.partial(&h2)),
            ));
        }
        vec![
            renamed(hg.audit(samples, seed), "group_axioms_h"),
            renamed(gg.audit(samples, seed), "group_axioms_g"),
            deviation_entry("partial_homomorphism", hom, GROUP_TOLERANCE),
            deviation_entry("phi_action", action, GROUP_TOLERANCE),
            deviation_entry("phi_automorphism", automorphism, GROUP_TOLERANCE),
            deviation_entry("peiffer", peiffer, GROUP_TOLERANCE),
            deviation_entry("partial_equivariant", equiv, GROUP_TOLERANCE),
        ]
    }
}

/// An element `(h, g)` of the 2-group; as an arrow it goes from `g` to
/// `partial(h) g`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoGroupElement {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
}

impl TwoGroupElement {
    pub fn new(h: Vec<f64>, g: Vec<f64>) -> Self {
        TwoGroupElement { h, g }
    }

    pub fn identity(cm: &CrossedModuleGroups) -> Self {
        TwoGroupElement::new(cm.h.identity.clone(), cm.g.identity.clone())
    }
}

/// Arrow composition `k1 ∘ k2`, defined when `g1 = partial(h2) g2`.
pub fn two_group_compose(
    k1: &TwoGroupElement,
    k2: &TwoGroupElement,
    cm: &CrossedModuleGroups,
    tol: f64,
) -> Result<TwoGroupElement, GroupoidError> {
    let target2 = (cm.g.mul)(&cm.partial(&k2.h), &k2.g);
    if max_abs_diff(&k1.g, &target2) > tol {
        return Err(GroupoidError::NotComposable {
            source_point: k1.g.clone(),
            target_point: target2,
        });
    }
    Ok(TwoGroupElement::new((cm.h.mul)(&k1.h, &k2.h), k2.g.clone()))
}

/// Product in `H ⋊ G`.
pub fn semidirect_mul(
    k1: &TwoGroupElement,
    k2: &TwoGroupElement,
    cm: &CrossedModuleGroups,
) -> TwoGroupElement {
    TwoGroupElement::new(
        (cm.h.mul)(&k1.h, &cm.phi(&k1.g, &k2.h)),
        (cm.g.mul)(&k1.g, &k2.g),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairGroupoidPoint {
    pub target: Vec<f64>,
    pub source: Vec<f64>,
}

impl PairGroupoidPoint {
    pub fn new(target: Vec<f64>, source: Vec<f64>) -> Self {
        PairGroupoidPoint { target, source }
    }

    /// `(a, b) ∘ (b, c) = (a, c)`.
    pub fn compose(
        &self,
        other: &PairGroupoidPoint,
        tol: f64,
    ) -> Result<PairGroupoidPoint, GroupoidError> {
        if max_abs_diff(&self.source, &other.target) > tol {
            return Err(GroupoidError::NotComposable {
                source_point: self.source.clone(),
                target_point: other.target.clone(),
            });
        }
        Ok(PairGroupoidPoint::new(
            self.target.clone(),
            other.source.clone(),
        ))
    }

    fn flat(&self) -> Vec<f64> {
        self.target.iter().chain(&self.source).copied().collect()
    }

    fn from_flat(p: &[f64]) -> Self {
        let n = p.len() / 2;
        PairGroupoidPoint::new(p[..n].to_vec(), p[n..].to_vec())
    }

    fn deviation(&self, other: &PairGroupoidPoint) -> f64 {
        max_abs_diff(&self.flat(), &other.flat())
    }
}

/// Polynomial vector field with float evaluation.
fn eval_field(field: &[Polynomial], p: &[f64]) -> Vec<f64> {
    field.iter().map(|c| c.eval_f64(p)).collect()
}

/// `(A, b)` when every component has degree at most one.
fn affine_parts(field: &[Polynomial]) -> Option<(DMatrix<f64>, DVector<f64>)> {
    if field.iter().any(|c| c.degree() > 1) {
        return None;
    }
    let n = field.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for (i, c) in field.iter().enumerate() {
        for (m, v) in c.terms() {
            match m.0.iter().position(|e| *e == 1) {
                Some(j) => a[(i, j)] = rat_to_f64(v),
                None => b[i] = rat_to_f64(v),
            }
        }
    }
    Some((a, b))
}

/// Closed-form flow of an affine field via the augmented matrix exponential.
pub fn flow_affine(field: &[Polynomial], p: &[f64], t: f64) -> Option<Vec<f64>> {
    let (a, b) = affine_parts(field)?;
    let n = field.len();
    let mut aug = DMatrix::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    aug.view_mut((0, n), (n, 1)).copy_from(&(b * t));
    let e = aug.exp();
    let mut v = DVector::from_column_slice(p).push(1.0);
    v = e * v;
    Some(v.as_slice()[..n].to_vec())
}

fn rk4_step(field: &[Polynomial], y: &[f64], h: f64) -> Vec<f64> {
    let k1 = eval_field(field, y);
    let k2 = eval_field(field, &add(y, &scale(&k1, h / 2.0)));
    let k3 = eval_field(field, &add(y, &scale(&k2, h / 2.0)));
    let k4 = eval_field(field, &add(y, &scale(&k3, h)));
    (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// RK4 with step doubling: a step is accepted when one full step and two
/// half steps agree to `tol`.
pub fn flow_rk4(
    field: &[Polynomial],
    p: &[f64],
    t: f64,
    tol: f64,
) -> Result<Vec<f64>, GroupoidError> {
    let dir = if t < 0.0 { -1.0 } else { 1.0 };
    let total = t.abs();
    let mut y = p.to_vec();
    let mut done = 0.0;
    let mut h = (total / 8.0).max(f64::MIN_POSITIVE);
    while done < total {
        h = h.min(total - done);
        let full = rk4_step(field, &y, dir * h);
        let half = rk4_step(field, &rk4_step(field, &y, dir * h / 2.0), dir * h / 2.0);
        let err = max_abs_diff(&full, &half);
        if !err.is_finite() || half.iter().any(|v| v.abs() > 1e12) {
            return Err(GroupoidError::Flow(format!(
                "solution escapes after time {done}"
            )));
        }
        if err <= tol {
            y = half
                .iter()
                .zip(&full)
                .map(|(a, b)| a + (a - b) / 15.0)
                .collect();
            done += h;
            if err < tol / 64.0 {
                h *= 2.0;
            }
        } else {
            h /= 2.0;
            if h < 1e-10 * total.max(1.0) {
                return Err(GroupoidError::Flow(format!(
                    "step size underflow at time {done}"
                )));
            }
        }
    }
    Ok(y)
}

/// Closed form when the field is affine, RK4 otherwise.
pub fn flow(field: &[Polynomial], p: &[f64], t: f64) -> Result<Vec<f64>, GroupoidError> {
    match flow_affine(field, p, t) {
        Some(y) => Ok(y),
        None => flow_rk4(field, p, t, RK4_LOCAL_TOLERANCE),
    }
}

/// `M x M` for a symplectic `M` with constant `pi`.
#[derive(Clone, Debug)]
pub struct PairGroupoid {
    pub base: PoissonBivector,
    pub context: GradedContext,
    pub bivector: PoissonBivector,
    pub target_sign: i64,
}

fn shift_poly(p: &Polynomial, vars: &crate::exactpoly::Vars, offset: usize) -> Polynomial {
    let n = vars.len();
    Polynomial::from_terms(
        vars,
        p.terms().map(|(m, c)| {
            let mut e = vec![0; n];
            e[offset..offset + m.0.len()].copy_from_slice(&m.0);
            (Monomial(e), c.clone())
        }),
    )
}

impl PairGroupoid {
    pub fn new(base: &PoissonBivector, target_sign: i64) -> Result<Self, GroupoidError> {
        let n = base.context().dim();
        let invertible = base.entries().all(|(_, p)| p.is_constant())
            && linalg::rational_rank(&constant_matrix(base)) == n;
        if !invertible {
            return Err(GroupoidError::NotSymplectic);
        }
        let even: Vec<String> = (1..=n)
            .map(|i| format!("x{i}"))
            .chain((1..=n).map(|i| format!("y{i}")))
            .collect();
        let odd: Vec<String> = even.iter().map(|v| format!("d{v}")).collect();
        let context = GradedContext::from_names(even, odd);
        let mut bivector = PoissonBivector::zero(&context);
        for ((i, j), p) in base.entries() {
            bivector.set(
                i,
                j,
                Polynomial::constant(context.even(), p.constant_term() * int(target_sign)),
            );
            bivector.set(
                n + i,
                n + j,
                Polynomial::constant(context.even(), p.constant_term()),
            );
        }
        Ok(PairGroupoid {
            base: base.clone(),
            context,
            bivector,
            target_sign,
        })
    }

    /// Picks the target sign for which diagonal lifts of hamiltonian flows
    /// are the hamiltonian flows of `s*f - t*f`.
    pub fn calibrated(
        base: &PoissonBivector,
        samples: usize,
        seed: u64,
    ) -> Result<(Self, Calibration), GroupoidError> {
        let minus = PairGroupoid::new(base, -1)?;
        let plus = PairGroupoid::new(base, 1)?;
        let dev_minus = minus.lift_deviation(samples, seed)?;
        let dev_plus = plus.lift_deviation(samples, seed)?;
        let cal = Calibration {
            target_sign: if dev_minus <= dev_plus { -1 } else { 1 },
            deviation: dev_minus.min(dev_plus),
            rejected_deviation: dev_minus.max(dev_plus),
        };
        let chosen = if cal.target_sign == -1 { minus } else { plus };
        Ok((chosen, cal))
    }

    pub fn dim_base(&self) -> usize {
        self.base.context().dim()
    }

    pub fn target_pullback(&self, f: &Polynomial) -> Polynomial {
        shift_poly(f, self.context.even(), 0)
    }

    pub fn source_pullback(&self, f: &Polynomial) -> Polynomial {
        shift_poly(f, self.context.even(), self.dim_base())
    }

    /// Components of the hamiltonian field `{S, f}` on `M x M`.
    pub fn hamiltonian_field(&self, f: &Polynomial) -> Vec<Polynomial> {
        hamiltonian_components(&self.bivector, f)
    }

    /// Largest gap, over sampled quadratic `f`, between the diagonal lift of
    /// the exact flow of `X_f` and the RK4 flow of `X_{s*f - t*f}`.
    pub fn lift_deviation(&self, samples: usize, seed: u64) -> Result<f64, GroupoidError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim_base();
        let mvars = self.base.context().even().clone();
        let mut dev: f64 = 0.0;
        for _ in 0..samples {
            let f = crate::sample::random_polynomial(&mut rng, &mvars, 2, 4);
            let xf = hamiltonian_components(&self.base, &f);
            let lifted = &self.source_pullback(&f) - &self.target_pullback(&f);
            let field = self.hamiltonian_field(&lifted);
            let p = uniform_vec(&mut rng, 2 * n, 1.0);
            let t = rng.random_range(0.1..1.0);
            let exact_t = flow_affine(&xf, &p[..n], t).expect("quadratic hamiltonian");
            let exact_s = flow_affine(&xf, &p[n..], t).expect("quadratic hamiltonian");
            let numeric = flow_rk4(&field, &p, t, RK4_LOCAL_TOLERANCE)?;
            let exact: Vec<f64> = exact_t.into_iter().chain(exact_s).collect();
            dev = dev.max(max_abs_diff(&exact, &numeric));
        }
        Ok(dev)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub target_sign: i64,
    pub deviation: f64,
    pub rejected_deviation: f64,
}

fn constant_matrix(pi: &PoissonBivector) -> RatMatrix {
    let n = pi.context().dim();
    (0..n)
        .map(|i| (0..n).map(|j| pi.get(i, j).constant_term()).collect())
        .collect()
}

fn hamiltonian_components(pi: &PoissonBivector, f: &Polynomial) -> Vec<Polynomial> {
    let ctx = pi.context();
    let x = schouten_bracket(
        &pi.to_function(),
        &GradedFunction::from_poly(ctx, f.clone()),
    )
    .expect("same context");
    x.vector_components().expect("degree 1")
}

/// A function whose hamiltonian field is the given field, by integrating
/// along rays; `None` if the field is not hamiltonian.
pub fn hamiltonian_primitive(pi: &PoissonBivector, field: &GradedFunction) -> Option<Polynomial> {
    let ctx = pi.context();
    let n = ctx.dim();
    let vars = ctx.even();
    let y = field.vector_components().ok()?;
    // Column i holds the components of the hamiltonian field of x_i.
    let k: RatMatrix = {
        let cols: Vec<Vec<Polynomial>> = (0..n)
            .map(|i| hamiltonian_components(pi, &Polynomial::var(vars, i)))
            .collect();
        (0..n)
            .map(|r| (0..n).map(|c| cols[c][r].constant_term()).collect())
            .collect()
    };
    let mut grad = vec![Polynomial::zero(vars); n];
    let mut by_monomial: BTreeMap<Monomial, Vec<Rational>> = BTreeMap::new();
    for (r, comp) in y.iter().enumerate() {
        for (m, c) in comp.terms() {
            by_monomial
                .entry(m.clone())
                .or_insert_with(|| vec![int(0); n])[r] = c.clone();
        }
    }
    for (m, rhs) in by_monomial {
        let sol = linalg::rational_solve(&k, &rhs, n)?;
        for (g, s) in grad.iter_mut().zip(sol) {
            *g = &*g + &Polynomial::monomial(vars, m.clone(), s);
        }
    }
    let mut f = Polynomial::zero(vars);
    for (i, g) in grad.iter().enumerate() {
        let xi = Polynomial::var(vars, i);
        for (m, c) in g.terms() {
            let d = i64::from(m.degree()) + 1;
            let term = Polynomial::monomial(vars, m.clone(), c / int(d));
            f = &f + &(&term * &xi);
        }
    }
    (hamiltonian_components(pi, &f) == y).then_some(f)
}

/// Hamiltonian 2-group action data on a symplectic vector space.
#[derive(Clone, Debug)]
pub struct LiftedAction {
    pub data: ActionData,
    pub groups: CrossedModuleGroups,
    pub pair: PairGroupoid,
    h_fields: Vec<Vec<Polynomial>>,
    g_fields: Vec<Vec<Polynomial>>,
}

impl LiftedAction {
    pub fn new(
        data: ActionData,
        groups: CrossedModuleGroups,
        pair: PairGroupoid,
    ) -> Result<Self, GroupoidError> {
        if !groups.h.additive || !groups.g.additive {
            return Err(GroupoidError::Unsupported(
                "the lifted action is realized for vector groups only".into(),
            ));
        }
        if data.j0.len() != groups.h.arity || data.j1.len() != groups.g.arity {
            return Err(GroupoidError::Unsupported(
                "group dimensions do not match the action data".into(),
            ));
        }
        let h_fields = data
            .j0
            .iter()
            .map(|j| hamiltonian_components(&data.pi, j))
            .collect();
        let g_fields = data
            .j1
            .iter()
            .map(|x| {
                x.vector_components()
                    .map_err(|_| GroupoidError::NotHamiltonian(x.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(LiftedAction {
            data,
            groups,
            pair,
            h_fields,
            g_fields,
        })
    }

    fn combination(
        fields: &[Vec<Polynomial>],
        coeffs: &[f64],
        n: usize,
        vars: &crate::exactpoly::Vars,
    ) -> Vec<Polynomial> {
        (0..n)
            .map(|i| {
                fields
                    .iter()
                    .zip(coeffs)
                    .fold(Polynomial::zero(vars), |acc, (f, c)| {
                        let c = Rational::from_float(-c).expect("finite group coordinate");
                        &acc + &f[i].scale(&c)
                    })
            })
            .collect()
    }

    /// Action of `G` on `M`: time-one flow of `-J1(g)`.
    pub fn act_on_base(&self, g: &[f64], p: &[f64]) -> Result<Vec<f64>, GroupoidError> {
        let ctx = self.data.context();
        let field = Self::combination(&self.g_fields, g, ctx.dim(), ctx.even());
        flow(&field, p, 1.0)
    }

    /// `g` moves both factors; `h` then moves the target by the flow of
    /// `-X_{J0(h)}`.
    pub fn act(
        &self,
        k: &TwoGroupElement,
        x: &PairGroupoidPoint,
    ) -> Result<PairGroupoidPoint, GroupoidError> {
        let ctx = self.data.context();
        let target = self.act_on_base(&k.g, &x.target)?;
        let source = self.act_on_base(&k.g, &x.source)?;
        let hfield = Self::combination(&self.h_fields, &k.h, ctx.dim(), ctx.even());
        Ok(PairGroupoidPoint::new(flow(&hfield, &target, 1.0)?, source))
    }

    /// Moment map of the action on `M x M`: `-t*J0` for `h` and
    /// `s*f - t*f` with `X_f = J1(v)` for `g`.
    pub fn moment_map(&self) -> Result<Vec<Polynomial>, GroupoidError> {
        let mut out: Vec<Polynomial> = self
            .data
            .j0
            .iter()
            .map(|j| -self.pair.target_pullback(j))
            .collect();
        for x in &self.data.j1 {
            let f = hamiltonian_primitive(&self.data.pi, x)
                .ok_or_else(|| GroupoidError::NotHamiltonian(x.to_string()))?;
            out.push(&self.pair.source_pullback(&f) - &self.pair.target_pullback(&f));
        }
        Ok(out)
    }

    /// Central differences of the action along basis directions against
    /// minus the hamiltonian fields of the moment map components.
    pub fn moment_deviation(&self, samples: usize, seed: u64) -> Result<f64, GroupoidError> {
        let moment = self.moment_map()?;
        let (nh, ng) = (self.groups.h.arity, self.groups.g.arity);
        let n = self.pair.dim_base();
        let eps = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dev: f64 = 0.0;
        for _ in 0..samples {
            let p = uniform_vec(&mut rng, 2 * n, 1.0);
            let x = PairGroupoidPoint::from_flat(&p);
            for (k, j) in moment.iter().enumerate() {
                let dir = |s: f64| -> TwoGroupElement {
                    let mut h = vec![0.0; nh];
                    let mut g = vec![0.0; ng];
                    if k < nh {
                        h[k] = s;
                    } else {
                        g[k - nh] = s;
                    }
                    TwoGroupElement::new(h, g)
                };
                let fwd = self.act(&dir(eps), &x)?.flat();
                let back = self.act(&dir(-eps), &x)?.flat();
                let derivative: Vec<f64> = fwd
                    .iter()
                    .zip(&back)
                    .map(|(a, b)| (a - b) / (2.0 * eps))
                    .collect();
                let expected = scale(&eval_field(&self.pair.hamiltonian_field(j), &p), -1.0);
                dev = dev.max(max_abs_diff(&derivative, &expected));
            }
        }
        Ok(dev)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KxkyStats {
    pub seed: u64,
    pub samples: usize,
    pub composable: usize,
    pub misclassified: usize,
    pub max_deviation: f64,
    pub target_deviation: f64,
}

/// Samples composable `x, y` and pairs `k1, k2`, half of them built to
/// satisfy the composability criterion, and compares `k1 x ∘ k2 y` with
/// `(k1 ∘ k2)(x ∘ y)`.
pub fn verify_kxky(
    action: &LiftedAction,
    samples: usize,
    seed: u64,
) -> Result<KxkyStats, GroupoidError> {
    let tol = 1e-8;
    let cm = &action.groups;
    let n = action.pair.dim_base();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = KxkyStats {
        seed,
        samples,
        composable: 0,
        misclassified: 0,
        max_deviation: 0.0,
        target_deviation: 0.0,
    };
    for i in 0..samples {
        let (a, b, c) = (
            uniform_vec(&mut rng, n, 2.0),
            uniform_vec(&mut rng, n, 2.0),
            uniform_vec(&mut rng, n, 2.0),
        );
        let x = PairGroupoidPoint::new(a, b.clone());
        let y = PairGroupoidPoint::new(b, c);
        let k2 = TwoGroupElement::new(cm.h.random_element(&mut rng), cm.g.random_element(&mut rng));
        let h1 = cm.h.random_element(&mut rng);
        let g1 = if i % 2 == 0 {
            (cm.g.mul)(&cm.partial(&k2.h), &k2.g)
        } else {
            cm.g.random_element(&mut rng)
        };
        let k1 = TwoGroupElement::new(h1, g1);
        let predicted = two_group_compose(&k1, &k2, cm, tol);
        let (k1x, k2y) = (action.act(&k1, &x)?, action.act(&k2, &y)?);
        let actual = k1x.compose(&k2y, tol);
        if predicted.is_ok() != actual.is_ok() {
            stats.misclassified += 1;
        }
        // Target law: t(kx) = partial(h) g t(x).
        let dg = (cm.g.mul)(&cm.partial(&k1.h), &k1.g);
        stats.target_deviation = stats.target_deviation.max(max_abs_diff(
            &k1x.target,
            &action.act_on_base(&dg, &x.target)?,
        ));
        if let (Ok(k), Ok(lhs)) = (predicted, actual) {
            stats.composable += 1;
            let rhs = action.act(&k, &x.compose(&y, tol)?)?;
            stats.max_deviation = stats.max_deviation.max(lhs.deviation(&rhs));
        }
    }
    Ok(stats)
}

/// A quotient of the pair groupoid by a linear group action.
#[derive(Clone, Debug)]
pub struct PairQuotient {
    /// Coordinates adapted to the action: invariant linear functions first.
    pub coordinates: Vec<(String, Polynomial)>,
    pub constraints: Vec<Polynomial>,
    pub report: ReductionReport,
    pub bivector: Option<PoissonBivector>,
    pub multiplicative: VerdictEntry,
}

#[derive(Clone, Debug)]
pub struct PairQuotients {
    pub moment_map: Vec<Polynomial>,
    pub marsden_weinstein: PairQuotient,
    pub global: PairQuotient,
}

fn inverse(m: &RatMatrix) -> RatMatrix {
    let n = m.len();
    let cols: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let e: Vec<Rational> = (0..n)
                .map(|k| if k == i { int(1) } else { int(0) })
                .collect();
            linalg::rational_solve(m, &e, n).expect("invertible change of coordinates")
        })
        .collect();
    (0..n)
        .map(|r| (0..n).map(|c| cols[c][r].clone()).collect())
        .collect()
}

fn linear_part(p: &Polynomial, n: usize) -> Option<(Vec<Rational>, Rational)> {
    if p.degree() > 1 {
        return None;
    }
    let mut row = vec![int(0); n];
    for (m, c) in p.terms() {
        if let Some(j) = m.0.iter().position(|e| *e == 1) {
            row[j] = c.clone();
        }
    }
    Some((row, p.constant_term()))
}

/// Reduces `(M x M, Pi)` along the zero set of affine `constraints` by the
/// span of constant `generators`, in coordinates adapted to the generators.
fn reduce_linear(
    pair: &PairGroupoid,
    constraints: &[Polynomial],
    generators: &[Vec<Rational>],
) -> Result<PairQuotient, GroupoidError> {
    let ctx = &pair.context;
    let n = ctx.dim();
    let names = ctx.even();
    let mut v: RatMatrix = generators.to_vec();
    let pivots = if v.is_empty() {
        Vec::new()
    } else {
        linalg::rational_rref(&mut v)
    };
    let invariants = if v.is_empty() {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| if k == i { int(1) } else { int(0) })
                    .collect()
            })
            .collect()
    } else {
        linalg::rational_kernel(&v, n)
    };
    let mut rows: RatMatrix = Vec::new();
    let mut new_names: Vec<String> = Vec::new();
    let mut fresh = 0;
    for l in &invariants {
        let nonzero: Vec<usize> = (0..n).filter(|&k| l[k] != int(0)).collect();
        let row = if nonzero.len() == 1 {
            new_names.push(names[nonzero[0]].clone());
            let s = l[nonzero[0]].clone();
            l.iter().map(|c| c / &s).collect()
        } else {
            fresh += 1;
            new_names.push(format!("u{fresh}"));
            l.clone()
        };
        rows.push(row);
    }
    for &p in &pivots {
        new_names.push(names[p].clone());
        rows.push(
            (0..n)
                .map(|k| if k == p { int(1) } else { int(0) })
                .collect(),
        );
    }
    let linv = inverse(&rows);
    let odd: Vec<String> = new_names.iter().map(|v| format!("d{v}")).collect();
    let new_ctx = GradedContext::from_names(new_names.clone(), odd);
    let nv = new_ctx.even();

    // Constant bivector in the new coordinates: L Pi L^T.
    let pi = constant_matrix(&pair.bivector);
    let mut bivector = PoissonBivector::zero(&new_ctx);
    for i in 0..n {
        for j in i + 1..n {
            let mut s = int(0);
            for a in 0..n {
                for b in 0..n {
                    s += &rows[i][a] * &pi[a][b] * &rows[j][b];
                }
            }
            bivector.set(i, j, Polynomial::constant(nv, s));
        }
    }

    // Constraints rewritten with p = L^{-1} z, then solved in graph form.
    let mut lin: RatMatrix = Vec::new();
    for c in constraints {
        let (row, c0) = linear_part(c, n)
            .ok_or_else(|| GroupoidError::Unsupported(format!("constraint {c} is not affine")))?;
        let mut new_row: Vec<Rational> = (0..n)
            .map(|j| (0..n).map(|a| &row[a] * &linv[a][j]).sum())
            .collect();
        new_row.push(c0);
        lin.push(new_row);
    }
    let cpivots = if lin.is_empty() {
        Vec::new()
    } else {
        linalg::rational_rref(&mut lin)
    };
    let mut solved = BTreeMap::new();
    let mut rewritten = Vec::new();
    for (r, &p) in cpivots.iter().enumerate() {
        if p == n {
            return Err(GroupoidError::Unsupported(
                "moment level set is empty".into(),
            ));
        }
        let mut rhs = Polynomial::constant(nv, -lin[r][n].clone());
        for k in p + 1..n {
            rhs = &rhs - &Polynomial::var(nv, k).scale(&lin[r][k]);
        }
        rewritten.push(&Polynomial::var(nv, p) - &rhs);
        solved.insert(p, rhs);
    }
    let ninv = invariants.len();
    let thetas: BTreeMap<usize, GradedFunction> = (ninv..n)
        .map(|t| (t, GradedFunction::zero(&new_ctx)))
        .collect();
    let quotient: Vec<usize> = (0..ninv).filter(|i| !solved.contains_key(i)).collect();
    let c = SubmanifoldSpec::new(&new_ctx, solved, thetas)?.with_quotient(quotient.clone())?;
    let report = check_coisotropic(&c, &bivector, &ReductionOptions::default())?;
    let reduced = report.reduced.as_ref().map(|r| r.bivector.clone());
    let multiplicative = match &reduced {
        Some(b) => multiplicativity(b, pair.dim_base()),
        None => VerdictEntry::unknown("multiplicative", "no reduced bivector"),
    };
    let coordinates = new_names
        .iter()
        .zip(&rows)
        .map(|(name, row)| {
            let p = (0..n).fold(Polynomial::zero(names), |acc, k| {
                &acc + &Polynomial::var(names, k).scale(&row[k])
            });
            (name.clone(), p)
        })
        .collect();
    Ok(PairQuotient {
        coordinates,
        constraints: rewritten,
        report,
        bivector: reduced,
        multiplicative,
    })
}

/// A bivector on a quotient pair groupoid is multiplicative when it is
/// `-p` on the target coordinates and `p` on the matching source ones.
fn multiplicativity(b: &PoissonBivector, n: usize) -> VerdictEntry {
    let names = b.context().even().clone();
    let split = |name: &str| -> Option<(char, usize)> {
        let (side, idx) = name.split_at(1);
        let i: usize = idx.parse().ok()?;
        matches!(side, "x" | "y")
            .then(|| (side.chars().next().unwrap(), i))
            .filter(|_| i >= 1 && i <= n)
    };
    let roles: Option<Vec<(char, usize)>> = names.iter().map(|v| split(v)).collect();
    let Some(roles) = roles else {
        return VerdictEntry::unknown(
            "multiplicative",
            "quotient coordinates do not split into target and source factors",
        );
    };
    let rename: BTreeMap<String, Polynomial> = roles
        .iter()
        .filter(|(s, _)| *s == 'x')
        .filter_map(|(_, i)| {
            let y = format!("y{i}");
            names
                .iter()
                .position(|v| *v == y)
                .map(|k| (format!("x{i}"), Polynomial::var(&names, k)))
        })
        .collect();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let entry = b.get(i, j);
            match (roles[i].0, roles[j].0) {
                ('x', 'x') => {
                    let partner =
                        |k: usize| names.iter().position(|v| *v == format!("y{}", roles[k].1));
                    let (Some(si), Some(sj)) = (partner(i), partner(j)) else {
                        return VerdictEntry::fail(
                            "multiplicative",
                            format!("{} has no source partner", names[i]),
                        );
                    };
                    let moved = entry.subst(&rename).expect("acyclic renaming");
                    if moved != -b.get(si, sj) {
                        return VerdictEntry::fail(
                            "multiplicative",
                            format!(
                                "target block at ({}, {}) is {entry}, source block is {}",
                                names[i],
                                names[j],
                                b.get(si, sj)
                            ),
                        );
                    }
                }
                ('x', 'y') | ('y', 'x') if !entry.is_zero() => {
                    return VerdictEntry::fail(
                        "multiplicative",
                        format!("mixed entry ({}, {}) = {entry}", names[i], names[j]),
                    );
                }
                _ => {}
            }
        }
    }
    VerdictEntry::pass("multiplicative")
}

/// Level-set and global quotients of the pair groupoid by the lifted action.
pub fn mw_quotient_pair(action: &LiftedAction) -> Result<PairQuotients, GroupoidError> {
    let pair = &action.pair;
    let moment = action.moment_map()?;
    let mut generators = Vec::new();
    for j in &moment {
        let field = pair.hamiltonian_field(j);
        if field.iter().any(|c| !c.is_constant()) {
            return Err(GroupoidError::Unsupported(format!(
                "moment component {j} is not affine"
            )));
        }
        generators.push(field.iter().map(Polynomial::constant_term).collect());
    }
    Ok(PairQuotients {
        marsden_weinstein: reduce_linear(pair, &moment, &generators)?,
        global: reduce_linear(pair, &[], &generators)?,
        moment_map: moment,
    })
}
