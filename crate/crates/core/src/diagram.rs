//! Diagram formula for covariances of Hermite monomials in
//! Y = (xi, eta, sqrt3 grad xi, sqrt3 grad eta) at two points.
//!
//! The result is a polynomial in sinc(u), sinc'(u), A(u), B(u) and the
//! direction components Delta_k, with exact rational coefficients.

use crate::kernels::{factorial, HermiteIndex};
use crate::scalar::{rat, Rational};
use std::collections::BTreeMap;

/// Exponents of (sinc, dsinc, A, B, Delta_1, Delta_2, Delta_3).
pub type Mono = [u8; 7];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KPoly {
    pub terms: BTreeMap<Mono, Rational>,
}

impl KPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial([0; 7], rat(1, 1))
    }

    pub fn monomial(m: Mono, c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, m: Mono, c: Rational) {
        let e = self.terms.entry(m).or_insert(rat(0, 1));
        *e += c;
        if *e == rat(0, 1) {
            self.terms.remove(&m);
        }
    }

    pub fn add(&mut self, o: &KPoly) {
        for (m, c) in &o.terms {
            self.add_term(*m, *c);
        }
    }

    pub fn scale(&self, s: Rational) -> KPoly {
        let mut p = KPoly::zero();
        if s != rat(0, 1) {
            for (m, c) in &self.terms {
                p.add_term(*m, c * s);
            }
        }
        p
    }

    pub fn mul(&self, o: &KPoly) -> KPoly {
        let mut p = KPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let mut m = [0u8; 7];
                for i in 0..7 {
                    m[i] = m1[i] + m2[i];
                }
                p.add_term(m, c1 * c2);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> KPoly {
        (0..k).fold(KPoly::one(), |acc, _| acc.mul(self))
    }

    /// Evaluates at given kernel values and direction.
    pub fn eval(&self, kv: [f64; 4], delta: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut v = *c.numer() as f64 / *c.denom() as f64;
                for i in 0..4 {
                    v *= kv[i].powi(m[i] as i32);
                }
                for k in 0..3 {
                    v *= delta[k].powi(m[4 + k] as i32);
                }
                v
            })
            .sum()
    }
}

const SINC: usize = 0;
const DSINC: usize = 1;
const KA: usize = 2;
const KB: usize = 3;

fn mono(kernel: usize, deltas: &[usize]) -> Mono {
    let mut m = [0u8; 7];
    m[kernel] = 1;
    for &k in deltas {
        m[4 + k] += 1;
    }
    m
}

/// Field (0 = xi, 1 = eta) and gradient axis (None for the value) of Y_p.
fn var_kind(p: usize) -> (usize, Option<usize>) {
    match p {
        0 => (0, None),
        1 => (1, None),
        2..=4 => (0, Some(p - 2)),
        _ => (1, Some(p - 5)),
    }
}

/// E[Y_p(x) Y_q(y)] with Delta = (x - y)/|x - y|, as (polynomial, carries sqrt 3).
pub fn cross_covariance(p: usize, q: usize) -> (KPoly, bool) {
    let (fp, gp) = var_kind(p);
    let (fq, gq) = var_kind(q);
    if fp != fq {
        return (KPoly::zero(), false);
    }
    match (gp, gq) {
        (None, None) => (KPoly::monomial(mono(SINC, &[]), rat(1, 1)), false),
        // sqrt3 * r_{k0} = sqrt3 sinc' Delta_k
        (Some(k), None) => (KPoly::monomial(mono(DSINC, &[k]), rat(1, 1)), true),
        // sqrt3 * r_{0k} = -sqrt3 sinc' Delta_k
        (None, Some(k)) => (KPoly::monomial(mono(DSINC, &[k]), rat(-1, 1)), true),
        // 3 (A Delta_k Delta_k' - B delta_kk')
        (Some(k), Some(l)) => {
            let mut p = KPoly::monomial(mono(KA, &[k, l]), rat(3, 1));
            if k == l {
                p.add(&KPoly::monomial(mono(KB, &[]), rat(-3, 1)));
            }
            (p, false)
        }
    }
}

/// E[H_alpha(Y(x)) H_beta(Y(y))] for alpha, beta in N^8.
pub fn hermite_cross_moment(alpha: &HermiteIndex, beta: &HermiteIndex) -> KPoly {
    assert_eq!(alpha.len(), 8);
    assert_eq!(beta.len(), 8);
    let mut total = KPoly::one();
    // xi and eta are independent, so the expectation factorizes by field.
    for field in [[0usize, 2, 3, 4], [1, 5, 6, 7]] {
        let rows: Vec<(usize, u32)> = field
            .iter()
            .filter(|&&p| alpha.alpha[p] > 0)
            .map(|&p| (p, alpha.alpha[p]))
            .collect();
        let cols: Vec<(usize, u32)> = field
            .iter()
            .filter(|&&q| beta.alpha[q] > 0)
            .map(|&q| (q, beta.alpha[q]))
            .collect();
        let rsum: u32 = rows.iter().map(|r| r.1).sum();
        let csum: u32 = cols.iter().map(|c| c.1).sum();
        if rsum != csum {
            return KPoly::zero();
        }
        let mut part = KPoly::zero();
        let mut table = vec![vec![0u32; cols.len()]; rows.len()];
        let mut col_left: Vec<u32> = cols.iter().map(|c| c.1).collect();
        tables(0, 0, rows[..].as_ref(), &cols, &mut table, &mut col_left, &mut |t| {
            part.add(&table_weight(&rows, &cols, t));
        });
        total = total.mul(&part);
        if total.is_zero() {
            return total;
        }
    }
    total
}

fn table_weight(rows: &[(usize, u32)], cols: &[(usize, u32)], t: &[Vec<u32>]) -> KPoly {
    let mut w = KPoly::one();
    let mut sqrt3 = 0u32;
    let mut denom: i128 = 1;
    for (i, (p, _)) in rows.iter().enumerate() {
        for (j, (q, _)) in cols.iter().enumerate() {
            let k = t[i][j];
            if k == 0 {
                continue;
            }
            let (c, s) = cross_covariance(*p, *q);
            if s {
                sqrt3 += k;
            }
            w = w.mul(&c.pow(k));
            denom *= factorial(k) as i128;
        }
    }
    assert!(sqrt3 % 2 == 0, "odd number of sqrt3 factors");
    let num: i128 = rows.iter().map(|r| factorial(r.1) as i128).product::<i128>()
        * cols.iter().map(|c| factorial(c.1) as i128).product::<i128>()
        * 3i128.pow(sqrt3 / 2);
    w.scale(rat(num, denom))
}

fn tables<F: FnMut(&[Vec<u32>])>(
    i: usize,
    j: usize,
    rows: &[(usize, u32)],
    cols: &[(usize, u32)],
    t: &mut Vec<Vec<u32>>,
    col_left: &mut Vec<u32>,
    emit: &mut F,
) {
    if i == rows.len() {
        if col_left.iter().all(|&c| c == 0) {
            emit(t);
        }
        return;
    }
    let row_used: u32 = t[i][..j].iter().sum();
    let row_left = rows[i].1 - row_used;
    if j + 1 == cols.len() {
        if row_left <= col_left[j] {
            t[i][j] = row_left;
            col_left[j] -= row_left;
            tables(i + 1, 0, rows, cols, t, col_left, emit);
            col_left[j] += row_left;
            t[i][j] = 0;
        }
        return;
    }
    for k in 0..=row_left.min(col_left[j]) {
        t[i][j] = k;
        col_left[j] -= k;
        tables(i, j + 1, rows, cols, t, col_left, emit);
        col_left[j] += k;
    }
    t[i][j] = 0;
}

/// A linear combination sum_alpha w_alpha H_alpha(Y).
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    pub terms: Vec<(HermiteIndex, Rational)>,
}

impl Block {
    pub fn new(label: impl Into<String>) -> Self {
        Block {
            label: label.into(),
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, alpha: [u32; 8], w: Rational) {
        self.terms.push((HermiteIndex::new(alpha.to_vec()), w));
    }
}

/// Cov(P(x), Q(y)) for blocks of centered Hermite monomials.
pub fn block_covariance(p: &Block, q: &Block) -> KPoly {
    let mut total = KPoly::zero();
    for (a, wa) in &p.terms {
        for (b, wb) in &q.terms {
            let m = hermite_cross_moment(a, b);
            if !m.is_zero() {
                total.add(&m.scale(wa * wb));
            }
        }
    }
    total
}
