//! Two-term graded Lie algebras `h[1] ⊕ g` by structure constants, their
//! crossed modules, and audits of infinitesimal action data on a Poisson
//! manifold.
//!
//! Basis elements of `g` are written `e1, e2, ...` and those of `h` are
//! `f1, f2, ...` in witnesses.

use rand::Rng;
use thiserror::Error;

use crate::exactpoly::{int, Polynomial, Rational};
use crate::gradedalg::{
    derived_bracket, schouten_bracket, GradedContext, GradedFunction, PoissonBivector,
};
use crate::linalg::{self, RatMatrix};
use crate::sample::small_rational;
use crate::subman::Sampling;
use crate::verdict::{overall, Verdict, VerdictEntry};

/// `c[i][j][k]` is the coefficient of basis element `k` in `[i, j]`.
pub type Constants = Vec<Vec<Vec<Rational>>>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DglaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("axiom `{id}` fails: {witness}")]
    Audit { id: String, witness: String },
    #[error("moment map is not a submersion at ({0})")]
    NotSubmersion(String),
}

pub fn zero_constants(a: usize, b: usize, c: usize) -> Constants {
    vec![vec![vec![int(0); c]; b]; a]
}

/// Skew constants from the listed brackets `[e_i, e_j] = sum coef e_k`, `i < j`.
pub fn lie_constants(dim: usize, brackets: &[(usize, usize, usize, Rational)]) -> Constants {
    let mut c = zero_constants(dim, dim, dim);
    for (i, j, k, v) in brackets {
        c[*i][*j][*k] += v;
        c[*j][*i][*k] -= v;
    }
    c
}

pub fn so3() -> Constants {
    lie_constants(
        3,
        &[(0, 1, 2, int(1)), (1, 2, 0, int(1)), (2, 0, 1, int(1))],
    )
}

/// The non-abelian two-dimensional algebra `[e1, e2] = e2`.
pub fn affine_line() -> Constants {
    lie_constants(2, &[(0, 1, 1, int(1))])
}

pub fn heisenberg() -> Constants {
    lie_constants(3, &[(0, 1, 2, int(1))])
}

fn basis_vector(n: usize, i: usize) -> Vec<Rational> {
    (0..n)
        .map(|k| if k == i { int(1) } else { int(0) })
        .collect()
}

fn vec_text(prefix: &str, v: &[Rational]) -> String {
    let parts: Vec<String> = v
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != int(0))
        .map(|(k, c)| format!("{c}*{prefix}{}", k + 1))
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Bilinear extension of structure constants.
fn bracket_vec(c: &Constants, x: &[Rational], y: &[Rational], out_dim: usize) -> Vec<Rational> {
    let mut out = vec![int(0); out_dim];
    for (i, xi) in x.iter().enumerate() {
        if *xi == int(0) {
            continue;
        }
        for (j, yj) in y.iter().enumerate() {
            if *yj == int(0) {
                continue;
            }
            let s = xi * yj;
            for (k, ck) in c[i][j].iter().enumerate() {
                out[k] += &s * ck;
            }
        }
    }
    out
}

fn add_vec(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub_vec(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn is_zero_vec(v: &[Rational]) -> bool {
    v.iter().all(|x| *x == int(0))
}

fn check_skew(id: &str, c: &Constants, name: &str) -> VerdictEntry {
    let n = c.len();
    for i in 0..n {
        for j in 0..n {
            let s = add_vec(&c[i][j], &c[j][i]);
            if !is_zero_vec(&s) {
                return VerdictEntry::fail(
                    id,
                    format!(
                        "[{name}{}, {name}{}] + [{name}{}, {name}{}] = {}",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1,
                        vec_text(name, &s)
                    ),
                );
            }
        }
    }
    VerdictEntry::pass(id)
}

/// Cyclic sum `[[x,y],z] + [[y,z],x] + [[z,x],y]` on basis triples.
fn check_jacobi(id: &str, c: &Constants, name: &str) -> VerdictEntry {
    let n = c.len();
    let b = |i| basis_vector(n, i);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let t1 = bracket_vec(c, &bracket_vec(c, &b(i), &b(j), n), &b(k), n);
                let t2 = bracket_vec(c, &bracket_vec(c, &b(j), &b(k), n), &b(i), n);
                let t3 = bracket_vec(c, &bracket_vec(c, &b(k), &b(i), n), &b(j), n);
                let s = add_vec(&add_vec(&t1, &t2), &t3);
                if !is_zero_vec(&s) {
                    return VerdictEntry::fail(
                        id,
                        format!(
                            "jacobiator({name}{}, {name}{}, {name}{}) = {}",
                            i + 1,
                            j + 1,
                            k + 1,
                            vec_text(name, &s)
                        ),
                    );
                }
            }
        }
    }
    VerdictEntry::pass(id)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DGLASpec {
    pub dim_h: usize,
    pub dim_g: usize,
    pub bracket_gg: Constants,
    /// `bracket_gh[i][a][b]`: coefficient of `f_b` in `[e_i, f_a]`.
    pub bracket_gh: Constants,
    /// Lands in degree -2, so must vanish; kept so the audit can say so.
    pub bracket_hh: Constants,
    /// `delta[i][a]`: coefficient of `e_i` in `delta(f_a)`.
    pub delta: RatMatrix,
}

impl DGLASpec {
    pub fn new(
        bracket_gg: Constants,
        bracket_gh: Constants,
        delta: RatMatrix,
    ) -> Result<Self, DglaError> {
        let dim_g = bracket_gg.len();
        let dim_h = bracket_gh.first().map_or(0, |r| r.len());
        let shape_ok = bracket_gg
            .iter()
            .all(|r| r.len() == dim_g && r.iter().all(|v| v.len() == dim_g))
            && bracket_gh.len() == dim_g
            && bracket_gh
                .iter()
                .all(|r| r.len() == dim_h && r.iter().all(|v| v.len() == dim_h))
            && delta.len() == dim_g
            && delta.iter().all(|r| r.len() == dim_h);
        if !shape_ok {
            return Err(DglaError::Dimension(format!(
                "expected g of dimension {dim_g} and h of dimension {dim_h}"
            )));
        }
        Ok(DGLASpec {
            dim_h,
            dim_g,
            bracket_gg,
            bracket_gh,
            bracket_hh: zero_constants(dim_h, dim_h, dim_h),
            delta,
        })
    }

    /// An ordinary Lie algebra in degree 0.
    pub fn lie_algebra(c: Constants) -> Self {
        let n = c.len();
        DGLASpec::new(c, vec![Vec::new(); n], vec![Vec::new(); n]).expect("consistent shapes")
    }

    /// `h = g`, `delta = scale * id` and the adjoint action.
    pub fn adjoint(c: Constants, scale: Rational) -> Self {
        let n = c.len();
        let delta = (0..n)
            .map(|i| {
                (0..n)
                    .map(|a| if i == a { scale.clone() } else { int(0) })
                    .collect()
            })
            .collect();
        DGLASpec::new(c.clone(), c, delta).expect("consistent shapes")
    }

    pub fn action(&self, v: &[Rational], w: &[Rational]) -> Vec<Rational> {
        bracket_vec(&self.bracket_gh, v, w, self.dim_h)
    }

    pub fn delta_of(&self, w: &[Rational]) -> Vec<Rational> {
        (0..self.dim_g)
            .map(|i| w.iter().zip(&self.delta[i]).map(|(x, d)| x * d).sum())
            .collect()
    }

    /// Same algebra in the bases given by the columns of `p` (for `g`) and
    /// `q` (for `h`).
    pub fn change_basis(&self, p: &RatMatrix, q: &RatMatrix) -> Self {
        let pinv = inverse(p);
        let qinv = inverse(q);
        let col =
            |m: &RatMatrix, i: usize| -> Vec<Rational> { m.iter().map(|r| r[i].clone()).collect() };
        let apply = |m: &RatMatrix, v: &[Rational]| -> Vec<Rational> {
            m.iter()
                .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        };
        let (ng, nh) = (self.dim_g, self.dim_h);
        let mut gg = zero_constants(ng, ng, ng);
        let mut gh = zero_constants(ng, nh, nh);
        let mut delta = vec![vec![int(0); nh]; ng];
        for i in 0..ng {
            for j in 0..ng {
                gg[i][j] = apply(
                    &pinv,
                    &bracket_vec(&self.bracket_gg, &col(p, i), &col(p, j), ng),
                );
            }
            for a in 0..nh {
                gh[i][a] = apply(&qinv, &self.action(&col(p, i), &col(q, a)));
            }
        }
        for a in 0..nh {
            let d = apply(&pinv, &self.delta_of(&col(q, a)));
            for i in 0..ng {
                delta[i][a] = d[i].clone();
            }
        }
        DGLASpec::new(gg, gh, delta).expect("consistent shapes")
    }
}

fn inverse(m: &RatMatrix) -> RatMatrix {
    let n = m.len();
    let cols: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            linalg::rational_solve(m, &basis_vector(n, i), n).expect("invertible basis change")
        })
        .collect();
    (0..n)
        .map(|r| (0..n).map(|c| cols[c][r].clone()).collect())
        .collect()
}

pub fn audit_dgla(spec: &DGLASpec) -> Vec<VerdictEntry> {
    let (ng, nh) = (spec.dim_g, spec.dim_h);
    let e = |i| basis_vector(ng, i);
    let f = |a| basis_vector(nh, a);
    let mut out = vec![
        check_skew("skew_gg", &spec.bracket_gg, "e"),
        check_jacobi("jacobi_gg", &spec.bracket_gg, "e"),
    ];

    let mut rep = VerdictEntry::pass("representation");
    'rep: for i in 0..ng {
        for j in 0..ng {
            let eij = bracket_vec(&spec.bracket_gg, &e(i), &e(j), ng);
            for a in 0..nh {
                let lhs = spec.action(&eij, &f(a));
                let rhs = sub_vec(
                    &spec.action(&e(i), &spec.action(&e(j), &f(a))),
                    &spec.action(&e(j), &spec.action(&e(i), &f(a))),
                );
                if lhs != rhs {
                    rep = VerdictEntry::fail(
                        "representation",
                        format!(
                            "[e{}, e{}] and f{} : {} vs {}",
                            i + 1,
                            j + 1,
                            a + 1,
                            vec_text("f", &lhs),
                            vec_text("f", &rhs)
                        ),
                    );
                    break 'rep;
                }
            }
        }
    }
    out.push(rep);

    let mut eq = VerdictEntry::pass("equivariance");
    'eq: for i in 0..ng {
        for a in 0..nh {
            let lhs = spec.delta_of(&spec.action(&e(i), &f(a)));
            let rhs = bracket_vec(&spec.bracket_gg, &e(i), &spec.delta_of(&f(a)), ng);
            if lhs != rhs {
                eq = VerdictEntry::fail(
                    "equivariance",
                    format!(
                        "delta([e{}, f{}]) = {} but [e{}, delta f{}] = {}",
                        i + 1,
                        a + 1,
                        vec_text("e", &lhs),
                        i + 1,
                        a + 1,
                        vec_text("e", &rhs)
                    ),
                );
                break 'eq;
            }
        }
    }
    out.push(eq);

    let mut peiffer = VerdictEntry::pass("peiffer");
    'pf: for a in 0..nh {
        for b in a..nh {
            let s = add_vec(
                &spec.action(&spec.delta_of(&f(a)), &f(b)),
                &spec.action(&spec.delta_of(&f(b)), &f(a)),
            );
            if !is_zero_vec(&s) {
                peiffer = VerdictEntry::fail(
                    "peiffer",
                    format!(
                        "[delta f{a1}, f{b1}] + [delta f{b1}, f{a1}] = {}",
                        vec_text("f", &s),
                        a1 = a + 1,
                        b1 = b + 1
                    ),
                );
                break 'pf;
            }
        }
    }
    out.push(peiffer);

    let hh_zero = spec.bracket_hh.iter().flatten().all(|v| is_zero_vec(v));
    out.push(if hh_zero {
        VerdictEntry::pass("hh_zero")
    } else {
        VerdictEntry::fail("hh_zero", "bracket of two degree -1 elements is non-zero")
    });
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossedModuleSpec {
    pub lie_h: Constants,
    pub lie_g: Constants,
    /// `delta_map[i][a]`: coefficient of `e_i` in `delta(f_a)`.
    pub delta_map: RatMatrix,
    /// `lambda_action[i][a][b]`: coefficient of `f_b` in `lambda(e_i) f_a`.
    pub lambda_action: Constants,
}

impl CrossedModuleSpec {
    fn dims(&self) -> (usize, usize) {
        (self.lie_g.len(), self.lie_h.len())
    }

    fn act(&self, v: &[Rational], w: &[Rational]) -> Vec<Rational> {
        bracket_vec(&self.lambda_action, v, w, self.lie_h.len())
    }

    fn delta_of(&self, w: &[Rational]) -> Vec<Rational> {
        self.delta_map
            .iter()
            .map(|row| row.iter().zip(w).map(|(d, x)| d * x).sum())
            .collect()
    }
}

pub fn dgla_to_crossed_module(spec: &DGLASpec) -> Result<CrossedModuleSpec, DglaError> {
    if let Some(bad) = audit_dgla(spec)
        .into_iter()
        .find(|e| e.verdict != Verdict::Pass)
    {
        return Err(DglaError::Audit {
            id: bad.id,
            witness: bad.witness.unwrap_or_default(),
        });
    }
    let nh = spec.dim_h;
    let mut lie_h = zero_constants(nh, nh, nh);
    for a in 0..nh {
        for b in 0..nh {
            lie_h[a][b] = spec.action(&spec.delta_of(&basis_vector(nh, a)), &basis_vector(nh, b));
        }
    }
    Ok(CrossedModuleSpec {
        lie_h,
        lie_g: spec.bracket_gg.clone(),
        delta_map: spec.delta.clone(),
        lambda_action: spec.bracket_gh.clone(),
    })
}

pub fn crossed_module_to_dgla(cm: &CrossedModuleSpec) -> Result<DGLASpec, DglaError> {
    if let Some(bad) = audit_crossed_module(cm)
        .into_iter()
        .find(|e| e.verdict != Verdict::Pass)
    {
        return Err(DglaError::Audit {
            id: bad.id,
            witness: bad.witness.unwrap_or_default(),
        });
    }
    DGLASpec::new(
        cm.lie_g.clone(),
        cm.lambda_action.clone(),
        cm.delta_map.clone(),
    )
}

pub fn audit_crossed_module(cm: &CrossedModuleSpec) -> Vec<VerdictEntry> {
    let (ng, nh) = cm.dims();
    let e = |i| basis_vector(ng, i);
    let f = |a| basis_vector(nh, a);
    let mut out = vec![
        check_skew("skew_h", &cm.lie_h, "f"),
        check_jacobi("jacobi_h", &cm.lie_h, "f"),
        check_skew("skew_g", &cm.lie_g, "e"),
        check_jacobi("jacobi_g", &cm.lie_g, "e"),
    ];
    let first_failure = |id: &str, mut probe: Box<dyn FnMut() -> Option<String> + '_>| match probe()
    {
        Some(w) => VerdictEntry::fail(id, w),
        None => VerdictEntry::pass(id),
    };

    out.push(first_failure(
        "lambda_action",
        Box::new(|| {
            for i in 0..ng {
                for j in 0..ng {
                    for a in 0..nh {
                        let lhs = cm.act(&bracket_vec(&cm.lie_g, &e(i), &e(j), ng), &f(a));
                        let rhs = sub_vec(
                            &cm.act(&e(i), &cm.act(&e(j), &f(a))),
                            &cm.act(&e(j), &cm.act(&e(i), &f(a))),
                        );
                        if lhs != rhs {
                            return Some(format!("(e{}, e{}, f{})", i + 1, j + 1, a + 1));
                        }
                    }
                }
            }
            None
        }),
    ));
    out.push(first_failure(
        "lambda_derivation",
        Box::new(|| {
            for i in 0..ng {
                for a in 0..nh {
                    for b in 0..nh {
                        let lhs = cm.act(&e(i), &bracket_vec(&cm.lie_h, &f(a), &f(b), nh));
                        let rhs = add_vec(
                            &bracket_vec(&cm.lie_h, &cm.act(&e(i), &f(a)), &f(b), nh),
                            &bracket_vec(&cm.lie_h, &f(a), &cm.act(&e(i), &f(b)), nh),
                        );
                        if lhs != rhs {
                            return Some(format!("(e{}, f{}, f{})", i + 1, a + 1, b + 1));
                        }
                    }
                }
            }
            None
        }),
    ));
    out.push(first_failure(
        "delta_equivariant",
        Box::new(|| {
            for i in 0..ng {
                for a in 0..nh {
                    let lhs = cm.delta_of(&cm.act(&e(i), &f(a)));
                    let rhs = bracket_vec(&cm.lie_g, &e(i), &cm.delta_of(&f(a)), ng);
                    if lhs != rhs {
                        return Some(format!("(e{}, f{})", i + 1, a + 1));
                    }
                }
            }
            None
        }),
    ));
    out.push(first_failure(
        "delta_inner",
        Box::new(|| {
            for a in 0..nh {
                for b in 0..nh {
                    let lhs = cm.act(&cm.delta_of(&f(a)), &f(b));
                    let rhs = bracket_vec(&cm.lie_h, &f(a), &f(b), nh);
                    if lhs != rhs {
                        return Some(format!(
                            "lambda(delta f{}) f{} = {} but [f{}, f{}] = {}",
                            a + 1,
                            b + 1,
                            vec_text("f", &lhs),
                            a + 1,
                            b + 1,
                            vec_text("f", &rhs)
                        ));
                    }
                }
            }
            None
        }),
    ));
    out
}

/// Structure constants of `h ⋊ g` on the basis `f1..fm, e1..en`.
pub fn semidirect_bracket(cm: &CrossedModuleSpec) -> Constants {
    let (ng, nh) = cm.dims();
    let n = nh + ng;
    let split = |k: usize| -> (Vec<Rational>, Vec<Rational>) {
        let v = basis_vector(n, k);
        (v[..nh].to_vec(), v[nh..].to_vec())
    };
    let mut c = zero_constants(n, n, n);
    for x in 0..n {
        for y in 0..n {
            let (w1, v1) = split(x);
            let (w2, v2) = split(y);
            let h = sub_vec(
                &add_vec(&bracket_vec(&cm.lie_h, &w1, &w2, nh), &cm.act(&v1, &w2)),
                &cm.act(&v2, &w1),
            );
            let g = bracket_vec(&cm.lie_g, &v1, &v2, ng);
            c[x][y] = h.into_iter().chain(g).collect();
        }
    }
    c
}

pub fn jacobi_holds(c: &Constants) -> bool {
    check_skew("skew", c, "b").verdict.is_pass() && check_jacobi("jacobi", c, "b").verdict.is_pass()
}

fn random_invertible<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RatMatrix {
    // Unit lower times upper with non-zero diagonal.
    let lower: RatMatrix = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    if r == c {
                        int(1)
                    } else if c < r {
                        int(rng.random_range(-2..=2))
                    } else {
                        int(0)
                    }
                })
                .collect()
        })
        .collect();
    let upper: RatMatrix = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    if r == c {
                        let mut d = small_rational(rng);
                        while d == int(0) {
                            d = small_rational(rng);
                        }
                        d
                    } else if c > r {
                        int(rng.random_range(-2..=2))
                    } else {
                        int(0)
                    }
                })
                .collect()
        })
        .collect();
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| (0..n).map(|k| &lower[r][k] * &upper[k][c]).sum())
                .collect()
        })
        .collect()
}

/// A valid spec with `dim h, dim g <= 3`, drawn from a few families and
/// presented in a random basis.
pub fn random_spec<R: Rng + ?Sized>(rng: &mut R) -> DGLASpec {
    let base = match rng.random_range(0..5) {
        // g acting on itself, no differential.
        0 => {
            let c = [so3(), affine_line(), heisenberg()][rng.random_range(0..3)].clone();
            DGLASpec::new(c.clone(), c.clone(), vec![vec![int(0); c.len()]; c.len()]).unwrap()
        }
        // Trivial module of dimension 1..3.
        1 => {
            let c = [so3(), affine_line(), heisenberg()][rng.random_range(0..3)].clone();
            let (ng, nh) = (c.len(), rng.random_range(1..=3));
            DGLASpec::new(c, zero_constants(ng, nh, nh), vec![vec![int(0); nh]; ng]).unwrap()
        }
        2 => {
            let c = [so3(), affine_line(), heisenberg()][rng.random_range(0..3)].clone();
            let mut s = small_rational(rng);
            while s == int(0) {
                s = small_rational(rng);
            }
            DGLASpec::adjoint(c, s)
        }
        // Line mapped onto the derived algebra of the affine line.
        3 => {
            let gh = vec![vec![vec![int(1)]], vec![vec![int(0)]]];
            DGLASpec::new(affine_line(), gh, vec![vec![int(0)], vec![int(1)]]).unwrap()
        }
        _ => DGLASpec::lie_algebra(
            [so3(), affine_line(), heisenberg()][rng.random_range(0..3)].clone(),
        ),
    };
    let p = random_invertible(rng, base.dim_g);
    let q = random_invertible(rng, base.dim_h);
    base.change_basis(&p, &q)
}

/// Infinitesimal action data: `J0` components pair `M` with `h`, `J1`
/// sends each basis element of `g` to a vector field.
#[derive(Clone, Debug)]
pub struct ActionData {
    pub pi: PoissonBivector,
    pub j0: Vec<Polynomial>,
    pub j1: Vec<GradedFunction>,
}

impl ActionData {
    pub fn context(&self) -> &GradedContext {
        self.pi.context()
    }

    fn j0_of(&self, w: &[Rational]) -> Polynomial {
        let vars = self.context().even();
        w.iter()
            .zip(&self.j0)
            .fold(Polynomial::zero(vars), |acc, (c, p)| &acc + &p.scale(c))
    }

    fn j1_of(&self, v: &[Rational]) -> GradedFunction {
        v.iter()
            .zip(&self.j1)
            .fold(GradedFunction::zero(self.context()), |acc, (c, x)| {
                &acc + &x.scale(c)
            })
    }
}

pub fn audit_action(data: &ActionData, spec: &DGLASpec) -> Result<Vec<VerdictEntry>, DglaError> {
    let (ng, nh) = (spec.dim_g, spec.dim_h);
    if data.j1.len() != ng || data.j0.len() != nh {
        return Err(DglaError::Dimension(format!(
            "{} vector fields for dim g = {ng}, {} moment components for dim h = {nh}",
            data.j1.len(),
            data.j0.len()
        )));
    }
    let ctx = data.context();
    let s = data.pi.to_function();
    let e = |i| basis_vector(ng, i);
    let f = |a| basis_vector(nh, a);
    let mut out = Vec::new();

    let mut action = VerdictEntry::pass("J1_action");
    'act: for i in 0..ng {
        for j in i + 1..ng {
            let lhs = schouten_bracket(&data.j1[i], &data.j1[j]).expect("same context");
            let rhs = data.j1_of(&bracket_vec(&spec.bracket_gg, &e(i), &e(j), ng));
            if lhs != rhs {
                action = VerdictEntry::fail(
                    "J1_action",
                    format!(
                        "(e{}, e{}): [X, Y] = {lhs} but image of bracket is {rhs}",
                        i + 1,
                        j + 1
                    ),
                );
                break 'act;
            }
        }
    }
    out.push(action);

    let mut poisson = VerdictEntry::pass("J1_poisson");
    for (i, x) in data.j1.iter().enumerate() {
        let l = schouten_bracket(&s, x).expect("same context");
        if !l.is_zero() {
            poisson = VerdictEntry::fail("J1_poisson", format!("e{}: L_X pi = {}", i + 1, -l));
            break;
        }
    }
    out.push(poisson);

    if nh == 0 {
        return Ok(out);
    }

    let mut equiv = VerdictEntry::pass("J0_equivariant");
    'eq: for i in 0..ng {
        for a in 0..nh {
            let lhs =
                GradedFunction::apply_vector_field(&data.j1[i], &data.j0[a]).expect("degree 1");
            let rhs = data.j0_of(&spec.action(&e(i), &f(a)));
            if lhs != rhs {
                equiv = VerdictEntry::fail(
                    "J0_equivariant",
                    format!("(v, w) = (e{}, f{}): {lhs} vs {rhs}", i + 1, a + 1),
                );
                break 'eq;
            }
        }
    }
    out.push(equiv);

    let mut moment = VerdictEntry::pass("moment");
    for a in 0..nh {
        let lhs = data.j1_of(&spec.delta_of(&f(a)));
        let ham = schouten_bracket(&s, &GradedFunction::from_poly(ctx, data.j0[a].clone()))
            .expect("same context");
        if lhs != ham {
            moment = VerdictEntry::fail(
                "moment",
                format!(
                    "f{}: image of delta is {lhs} but the hamiltonian field is {ham}",
                    a + 1
                ),
            );
            break;
        }
    }
    out.push(moment);

    // Brackets of moment components against delta-images of the h basis.
    let mut poisson_map = VerdictEntry::pass("J0_delta_equivariant");
    'pm: for a in 0..nh {
        for b in 0..nh {
            let fa = GradedFunction::from_poly(ctx, data.j0[a].clone());
            let fb = GradedFunction::from_poly(ctx, data.j0[b].clone());
            let lhs = derived_bracket(&s, &fa, &fb).expect("functions");
            let rhs = data.j0_of(&spec.action(&spec.delta_of(&f(a)), &f(b)));
            if lhs != rhs {
                poisson_map = VerdictEntry::fail(
                    "J0_delta_equivariant",
                    format!("(f{}, f{}): {{J0, J0}} = {lhs} vs {rhs}", a + 1, b + 1),
                );
                break 'pm;
            }
        }
    }
    out.push(poisson_map);
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct KernelDistribution {
    pub generators: Vec<GradedFunction>,
    pub verdicts: Vec<VerdictEntry>,
}

/// Generators of `ker dJ0` and a check that the action preserves it.
pub fn compute_d_and_invariance(
    data: &ActionData,
    sampling: Sampling,
) -> Result<KernelDistribution, DglaError> {
    let ctx = data.context();
    let n = ctx.dim();
    let jac: Vec<Vec<Polynomial>> = data
        .j0
        .iter()
        .map(|p| (0..n).map(|i| p.diff_index(i)).collect())
        .collect();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(sampling.seed);
    for _ in 0..sampling.samples {
        let pt = crate::sample::random_point(&mut rng, n);
        if linalg::rational_rank(&linalg::eval_matrix(&jac, &pt)) < data.j0.len() {
            let coords: Vec<String> = pt.iter().map(|c| c.to_string()).collect();
            return Err(DglaError::NotSubmersion(coords.join(", ")));
        }
    }
    let kernel = if data.j0.is_empty() {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| Polynomial::constant(ctx.even(), if k == i { int(1) } else { int(0) }))
                    .collect()
            })
            .collect()
    } else {
        linalg::poly_kernel(&jac, ctx.even(), n)
    };
    let generators: Vec<GradedFunction> = kernel
        .iter()
        .map(|v| GradedFunction::vector_field(ctx, v))
        .collect();

    let mut inv = VerdictEntry::pass("D_invariant");
    'inv: for (i, v) in data.j1.iter().enumerate() {
        for x in &generators {
            let moved = schouten_bracket(v, x).expect("same context");
            for (a, p) in data.j0.iter().enumerate() {
                let pairing = GradedFunction::apply_vector_field(&moved, p).expect("degree 1");
                if !pairing.is_zero() {
                    inv = VerdictEntry::fail(
                        "D_invariant",
                        format!(
                            "<d J0(f{}), L_X Y> = {pairing} for X = image of e{}, Y = {x}",
                            a + 1,
                            i + 1
                        ),
                    );
                    break 'inv;
                }
            }
        }
    }
    Ok(KernelDistribution {
        generators,
        verdicts: vec![inv],
    })
}

pub fn all_pass(entries: &[VerdictEntry]) -> bool {
    overall(entries) == Verdict::Pass
}
