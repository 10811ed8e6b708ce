//! Exact linear algebra over the rationals and over polynomial rings.
//!
//! Polynomial matrices are treated over the fraction field: ranks come from
//! fraction-free (Bareiss) elimination, kernels and solutions from Cramer's
//! rule on a non-singular pivot minor, so every intermediate stays a
//! polynomial.

use num_traits::{One, Zero};

use crate::exactpoly::{Polynomial, Rational, Vars};

pub type PolyMatrix = Vec<Vec<Polynomial>>;
pub type RatMatrix = Vec<Vec<Rational>>;

/// Pivot rows and columns (original indices) of a fraction-free elimination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PivotSet {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl PivotSet {
    pub fn rank(&self) -> usize {
        self.rows.len()
    }
}

fn ncols<T>(m: &[Vec<T>]) -> usize {
    m.first().map_or(0, Vec::len)
}

/// Bareiss elimination with full pivoting. Returns the pivot minor's rows and
/// columns; its determinant is non-zero over the fraction field.
pub fn poly_pivots(m: &[Vec<Polynomial>]) -> PivotSet {
    let rows = m.len();
    let cols = ncols(m);
    let mut a: PolyMatrix = m.to_vec();
    let mut row_ix: Vec<usize> = (0..rows).collect();
    let mut col_ix: Vec<usize> = (0..cols).collect();
    let mut prev: Option<Polynomial> = None;
    let mut k = 0;
    while k < rows.min(cols) {
        // Prefer the sparsest non-zero pivot to limit growth.
        let mut best: Option<(usize, usize, usize)> = None;
        for (i, row) in a.iter().enumerate().skip(k) {
            for (j, e) in row.iter().enumerate().skip(k) {
                if !e.is_zero() {
                    let cost = e.num_terms() * 8 + e.degree() as usize;
                    if best.is_none_or(|(_, _, c)| cost < c) {
                        best = Some((i, j, cost));
                    }
                }
            }
        }
        let Some((pi, pj, _)) = best else { break };
        a.swap(k, pi);
        row_ix.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        col_ix.swap(k, pj);
        let pivot = a[k][k].clone();
        for i in k + 1..rows {
            for j in k + 1..cols {
                let num = &(&pivot * &a[i][j]) - &(&a[i][k] * &a[k][j]);
                a[i][j] = match &prev {
                    Some(p) => num.exact_div(p).expect("Bareiss step must divide exactly"),
                    None => num,
                };
            }
            let z = Polynomial::zero(a[i][k].vars());
            a[i][k] = z;
        }
        prev = Some(pivot);
        k += 1;
    }
    PivotSet {
        rows: row_ix[..k].to_vec(),
        cols: col_ix[..k].to_vec(),
    }
}

pub fn poly_rank(m: &[Vec<Polynomial>]) -> usize {
    poly_pivots(m).rank()
}

/// Fraction-free determinant.
pub fn poly_det(m: &[Vec<Polynomial>], vars: &Vars) -> Polynomial {
    let n = m.len();
    if n == 0 {
        return Polynomial::one(vars);
    }
    let mut a: PolyMatrix = m.to_vec();
    let mut sign = true;
    let mut prev = Polynomial::one(vars);
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !a[i][k].is_zero()) else {
            return Polynomial::zero(vars);
        };
        if p != k {
            a.swap(p, k);
            sign = !sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &(&a[k][k] * &a[i][j]) - &(&a[i][k] * &a[k][j]);
                a[i][j] = num
                    .exact_div(&prev)
                    .expect("Bareiss step must divide exactly");
            }
        }
        prev = a[k][k].clone();
    }
    if sign {
        prev
    } else {
        -prev
    }
}

fn minor(m: &[Vec<Polynomial>], rows: &[usize], cols: &[usize]) -> PolyMatrix {
    rows.iter()
        .map(|&i| cols.iter().map(|&j| m[i][j].clone()).collect())
        .collect()
}

/// Divide out a rational content and any entry that divides every entry.
pub fn primitive_part(v: &[Polynomial]) -> Vec<Polynomial> {
    let mut out = v.to_vec();
    loop {
        let mut changed = false;
        let mut cands: Vec<Polynomial> = out
            .iter()
            .filter(|e| !e.is_zero() && !e.is_constant())
            .cloned()
            .collect();
        cands.sort_by_key(|e| (e.degree(), e.num_terms()));
        for d in cands {
            let q: Option<Vec<Polynomial>> = out.iter().map(|e| e.exact_div(&d)).collect();
            if let Some(q) = q {
                out = q;
                changed = true;
                break;
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(first) = out.iter().find(|e| !e.is_zero()) {
        let (_, lc) = first.leading_term().expect("non-zero");
        let inv = Rational::one() / lc;
        out = out.iter().map(|e| e.scale(&inv)).collect();
    }
    out
}

/// Basis of the right kernel over the fraction field, with polynomial entries.
pub fn poly_kernel(m: &[Vec<Polynomial>], vars: &Vars, cols: usize) -> Vec<Vec<Polynomial>> {
    let piv = poly_pivots(m);
    let r = piv.rank();
    let mut out = Vec::new();
    for f in (0..cols).filter(|c| !piv.cols.contains(c)) {
        let mut v = vec![Polynomial::zero(vars); cols];
        let base = minor(m, &piv.rows, &piv.cols);
        v[f] = poly_det(&base, vars);
        for t in 0..r {
            let mut cols_t = piv.cols.clone();
            cols_t[t] = f;
            v[piv.cols[t]] = -poly_det(&minor(m, &piv.rows, &cols_t), vars);
        }
        out.push(primitive_part(&v));
    }
    out
}

pub fn transpose<T: Clone>(m: &[Vec<T>], cols: usize) -> Vec<Vec<T>> {
    (0..cols)
        .map(|j| m.iter().map(|row| row[j].clone()).collect())
        .collect()
}

/// Left kernel `{w : w m = 0}` over the fraction field.
pub fn poly_left_kernel(m: &[Vec<Polynomial>], vars: &Vars) -> Vec<Vec<Polynomial>> {
    let rows = m.len();
    poly_kernel(&transpose(m, ncols(m)), vars, rows)
}

/// A polynomial solution of `m x = b`, or `None` when the system is
/// inconsistent or the particular Cramer solution is not polynomial.
pub fn poly_solve(
    m: &[Vec<Polynomial>],
    b: &[Polynomial],
    vars: &Vars,
    cols: usize,
) -> Option<Vec<Polynomial>> {
    let piv = poly_pivots(m);
    let mut x = vec![Polynomial::zero(vars); cols];
    if piv.rank() > 0 {
        let base = minor(m, &piv.rows, &piv.cols);
        let det = poly_det(&base, vars);
        for t in 0..piv.rank() {
            let mut a = base.clone();
            for (row, &i) in a.iter_mut().zip(&piv.rows) {
                row[t] = b[i].clone();
            }
            x[piv.cols[t]] = poly_det(&a, vars).exact_div(&det)?;
        }
    }
    for (row, rhs) in m.iter().zip(b) {
        let mut acc = Polynomial::zero(vars);
        for (e, xi) in row.iter().zip(&x) {
            acc = &acc + &(e * xi);
        }
        if &acc != rhs {
            return None;
        }
    }
    Some(x)
}

pub fn eval_matrix(m: &[Vec<Polynomial>], point: &[Rational]) -> RatMatrix {
    m.iter()
        .map(|row| row.iter().map(|e| e.eval(point)).collect())
        .collect()
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rational_rref(m: &mut RatMatrix) -> Vec<usize> {
    let rows = m.len();
    let cols = ncols(m);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Rational::one() / &m[r][c];
        for e in m[r].iter_mut() {
            *e *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rational_rank(m: &[Vec<Rational>]) -> usize {
    let mut a = m.to_vec();
    rational_rref(&mut a).len()
}

/// Solves `m x = b` with every free variable set to zero.
pub fn rational_solve(m: &[Vec<Rational>], b: &[Rational], cols: usize) -> Option<Vec<Rational>> {
    let mut aug: RatMatrix = m
        .iter()
        .zip(b)
        .map(|(row, r)| {
            let mut row = row.clone();
            row.push(r.clone());
            row
        })
        .collect();
    let pivots = rational_rref(&mut aug);
    if pivots.last() == Some(&cols) {
        return None;
    }
    let mut x = vec![Rational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = aug[i][cols].clone();
    }
    Some(x)
}

pub fn rational_kernel(m: &[Vec<Rational>], cols: usize) -> RatMatrix {
    let mut a = m.to_vec();
    let pivots = rational_rref(&mut a);
    let mut out = Vec::new();
    for f in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Rational::zero(); cols];
        v[f] = Rational::one();
        for (i, &c) in pivots.iter().enumerate() {
            v[c] = -a[i][f].clone();
        }
        out.push(v);
    }
    out
}
