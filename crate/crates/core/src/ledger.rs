//! Term ledger for Var(I_4(B_R)).
//!
//! Every covariance between Hermite blocks is expanded by the diagram formula
//! into monomials sinc^a sinc'^b A^c B^d Delta^e. Over B_R x B_R each monomial
//! factorizes into a radial integral and a sphere moment, so a term's leading
//! constant, in units U = 4 pi^3 R^3 / 3 = vol(B_R) pi^2, is
//!
//! ```text
//! coefficient * (angular / pi) * (int_0^inf g rho^2 d rho / pi)
//! ```
//!
//! Var(2 pi I_4) ~ K U translates to Var(I_4) / vol ~ K / 4; that division is
//! done in [`var_i4_per_volume`] and nowhere else.

use crate::chaos::{chaos_multi_indices, Normalization};
use crate::diagram::{block_covariance, Block, KPoly};
use crate::error::Result;
use crate::kernels::sinc_kernel;
use crate::radial::{overlap_integral, radial_integral, RadialKernelSpec};
use crate::scalar::{rat, rat_string, rat_to_f64, Rational};
use crate::sphere::{angular_pattern_sum, AngularPattern};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDerivatives {
    pub r: f64,
    pub grad_x: [f64; 3],
    pub grad_y: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

/// r, r_{k0}, r_{0k} and r_{kk'} at displacement x - y.
pub fn kernel_derivatives(d: [f64; 3]) -> KernelDerivatives {
    let u = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let delta = if u > 0.0 {
        [d[0] / u, d[1] / u, d[2] / u]
    } else {
        [0.0; 3]
    };
    let k = sinc_kernel(u);
    let mut hess = [[0.0; 3]; 3];
    let mut grad_x = [0.0; 3];
    let mut grad_y = [0.0; 3];
    for i in 0..3 {
        grad_x[i] = k.r1 * delta[i];
        grad_y[i] = -grad_x[i];
        for j in 0..3 {
            hess[i][j] = k.a * delta[i] * delta[j] - if i == j { k.b } else { 0.0 };
        }
    }
    KernelDerivatives {
        r: k.r,
        grad_x,
        grad_y,
        hess,
    }
}

/// 1/(3 pi): expected nodal length per unit volume.
pub fn expected_length_density() -> f64 {
    1.0 / (3.0 * PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosTerm {
    pub label: String,
    pub coefficient: Rational,
    pub radial: RadialKernelSpec,
    pub angular: AngularPattern,
    pub sign_known_nonnegative: bool,
}

// Variable slots in Y: 0 xi, 1 eta, 2..5 xibar_k, 5..8 etabar_k.
fn slot(field: usize, axis: Option<usize>) -> usize {
    match axis {
        None => field,
        Some(k) => 2 + 3 * field + k,
    }
}

fn unit2(pairs: &[(usize, u32)]) -> [u32; 8] {
    let mut a = [0u32; 8];
    for &(s, p) in pairs {
        a[s] += p;
    }
    a
}

/// The blocks A_{1i}, A_{2i}, A_{3i} of 2 pi I_4, with the published
/// coefficients: 2 pi b0 b4 a0 = 1/8, 2 pi b2^2 a0 = 1/4,
/// 2 pi b0^2 a_{4e_k} = -5/9, 2 pi b0 b2 a_{2e_k} = -1/6,
/// 2 pi b0^2 a_{2e_i+2e_j} = 1/9 over ordered i != j.
pub fn published_blocks() -> Vec<(usize, Block)> {
    let (xi, eta) = (0usize, 1usize);
    let mut out = Vec::new();
    let mut b = Block::new("A11");
    b.push(unit2(&[(slot(xi, None), 4)]), rat(1, 8));
    out.push((1, b));
    let mut b = Block::new("A12");
    b.push(unit2(&[(slot(eta, None), 4)]), rat(1, 8));
    out.push((1, b));
    let mut b = Block::new("A13");
    b.push(unit2(&[(slot(xi, None), 2), (slot(eta, None), 2)]), rat(1, 4));
    out.push((1, b));
    for (label, f) in [("A14", xi), ("A15", eta)] {
        let mut b = Block::new(label);
        for k in 0..3 {
            b.push(unit2(&[(slot(f, Some(k)), 4)]), rat(-5, 9));
        }
        out.push((1, b));
    }
    for (label, fv, fg) in [("A21", xi, xi), ("A22", eta, eta), ("A23", xi, eta), ("A24", eta, xi)] {
        let mut b = Block::new(label);
        for k in 0..3 {
            b.push(unit2(&[(slot(fv, None), 2), (slot(fg, Some(k)), 2)]), rat(-1, 6));
        }
        out.push((2, b));
    }
    for (label, f1, f2) in [("A31", xi, xi), ("A32", eta, eta), ("A33", xi, eta)] {
        let mut b = Block::new(label);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    b.push(unit2(&[(slot(f1, Some(i)), 2), (slot(f2, Some(j)), 2)]), rat(1, 9));
                }
            }
        }
        out.push((3, b));
    }
    out
}

/// sum_alpha 2 pi c_alpha H_alpha(Y) over |alpha| = 2q.
pub fn chaos_block(q: u32, norm: Normalization) -> Result<Block> {
    let mut b = Block::new(format!("2pi I{}", 2 * q));
    b.terms = chaos_multi_indices(2 * q, norm)?;
    Ok(b)
}

/// Covariances the published argument drops because they are nonnegative.
fn dropped_as_nonnegative(a: &str, b: &str) -> bool {
    if a.starts_with("A2") && b.starts_with("A2") || a.starts_with("A3") && b.starts_with("A3") {
        return true;
    }
    matches!(
        (a, b),
        ("A14", "A21") | ("A15", "A22") | ("A11", "A31") | ("A12", "A32") | ("A13", "A33")
    )
}

/// Groups a covariance polynomial into radial x angular-pattern terms.
/// Monomials with an odd Delta exponent integrate to zero and are dropped.
pub fn poly_to_terms(label: &str, poly: &KPoly, nonneg: bool) -> Vec<ChaosTerm> {
    let mut grouped: BTreeMap<([u8; 4], [u32; 3]), Rational> = BTreeMap::new();
    for (m, c) in &poly.terms {
        if m[4..].iter().any(|e| e % 2 == 1) {
            continue;
        }
        let mut e = [m[4] as u32, m[5] as u32, m[6] as u32];
        e.sort_unstable_by(|a, b| b.cmp(a));
        *grouped
            .entry(([m[0], m[1], m[2], m[3]], e))
            .or_insert(rat(0, 1)) += c;
    }
    let mut out = Vec::new();
    for ((k, e), c) in grouped {
        if c == rat(0, 1) {
            continue;
        }
        // An orbit sum spread over the ordered index tuples of the pattern.
        let (angular, tuples) = match (e[0], e[1], e[2]) {
            (0, _, _) => (AngularPattern::single(0, 0, 0), 1),
            (a, 0, _) => (AngularPattern::sum_over_k(a), 3),
            (a, b, 0) => (AngularPattern::pairs(a, b), 6),
            (a, b, c3) => (AngularPattern::triples(a, b, c3), 6),
        };
        out.push(ChaosTerm {
            label: label.to_string(),
            coefficient: c / rat(tuples, 1),
            radial: RadialKernelSpec::product(k[0] as u32, k[1] as u32, k[2] as u32, k[3] as u32),
            angular: angular.expect("even exponents"),
            sign_known_nonnegative: nonneg,
        });
    }
    out
}

fn pair_label(a: &str, b: &str) -> String {
    if a == b {
        format!("Var({a})")
    } else {
        format!("Cov({a},{b})")
    }
}

/// Every nonvanishing Var/Cov contribution among the published blocks.
pub fn i4_term_catalog() -> Vec<ChaosTerm> {
    let blocks = published_blocks();
    let mut out = Vec::new();
    for i in 0..blocks.len() {
        for j in i..blocks.len() {
            let (a, b) = (&blocks[i].1, &blocks[j].1);
            let poly = block_covariance(a, b);
            let nonneg = dropped_as_nonnegative(&a.label, &b.label);
            out.extend(poly_to_terms(&pair_label(&a.label, &b.label), &poly, nonneg));
        }
    }
    out
}

/// Var(2 pi I_4) terms with the exact det_perp coefficients (single block).
pub fn exact_i4_catalog() -> Result<Vec<ChaosTerm>> {
    let b = chaos_block(2, Normalization::Exact)?;
    Ok(poly_to_terms("Var(2pi I4)", &block_covariance(&b, &b), false))
}

/// Coefficient times angular sum over pi, exactly.
pub fn term_rational_factor(term: &ChaosTerm) -> Result<Rational> {
    Ok(term.coefficient * angular_pattern_sum(&term.angular)?.0)
}

/// The term's leading constant in units of 4 pi^3 R^3 / 3.
pub fn evaluate_term(term: &ChaosTerm, tolerance: f64) -> Result<f64> {
    let radial = radial_integral(&term.radial, tolerance)?.value;
    Ok(rat_to_f64(&term_rational_factor(term)?) * radial / PI)
}

/// Var(I_4)/vol from a constant K with Var(2 pi I_4) ~ K * 4 pi^3 R^3 / 3.
pub fn var_i4_per_volume(k: f64) -> f64 {
    // K vol pi^2 / (2 pi)^2 / vol
    k / 4.0
}

/// Finite-R value of sum over terms of int_{B_R x B_R}, divided by (2 pi)^2 vol(B_R).
/// For chaos blocks built with weights 2 pi c_alpha this is Var(I_{2q}(B_R)) / vol.
pub fn finite_radius_variance_per_volume(terms: &[ChaosTerm], r: f64) -> Result<f64> {
    let vol = 4.0 * PI / 3.0 * r.powi(3);
    let mut cache: HashMap<RadialKernelSpec, f64> = HashMap::new();
    let mut total = 0.0;
    for t in terms {
        let ov = match cache.get(&t.radial) {
            Some(v) => *v,
            None => {
                let v = overlap_integral(r, &t.radial)?;
                cache.insert(t.radial.clone(), v);
                v
            }
        };
        // overlap already includes the full sphere 4 pi; the term's angular
        // factor replaces it.
        total += rat_to_f64(&term_rational_factor(t)?) * PI * ov / (4.0 * PI);
    }
    Ok(total / (4.0 * PI * PI) / vol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flag {
    #[serde(rename = "ok")]
    Ok,
    #[serde(rename = "mismatch")]
    Mismatch,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Ok => "ok",
            Flag::Mismatch => "mismatch",
            Flag::NotApplicable => "n/a",
        }
    }
}

/// Why a published value is expected to disagree with the recomputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Discrepancy {
    /// Follows from the documented r^4 overlap / normalization questions.
    OpenQuestion,
    /// An arithmetic slip in the published term evaluation.
    Erratum,
}

pub struct PaperValue {
    pub label: &'static str,
    pub value: Rational,
    pub expected: Option<Discrepancy>,
    pub note: &'static str,
}

/// Published constants (units of 4 pi^3 R^3 / 3 unless stated).
pub fn paper_values() -> Vec<PaperValue> {
    use Discrepancy::*;
    let pv = |label, n, d, expected, note| PaperValue {
        label,
        value: rat(n, d),
        expected,
        note,
    };
    let r4 = "published r^4 overlap constant is twice its own reduction";
    let e1 = "sum_{k != j} Delta_j^2 is 8 pi, not 12 pi; radial factor of the distinct-index case is sinc'^2 A^2";
    let e2 = "uses 46/3675 where its own ingredients give 46/1225";
    vec![
        pv("Var(A11)", 3, 4, Some(OpenQuestion), r4),
        pv("Var(A12)", 3, 4, Some(OpenQuestion), r4),
        pv("Var(A13)", 1, 2, Some(OpenQuestion), r4),
        pv("Var(A14)", 488, 7, None, ""),
        pv("Var(A15)", 488, 7, None, ""),
        pv("Cov(A11,A14)", -21, 5, None, ""),
        pv("Cov(A12,A15)", -21, 5, None, ""),
        pv("Cov(A11,A21)", -1, 2, None, ""),
        pv("Cov(A12,A22)", -1, 2, None, ""),
        pv("Cov(A13,A23)", -1, 6, None, ""),
        pv("Cov(A13,A24)", -1, 6, None, ""),
        pv("Cov(A14,A31)", -592, 105, None, ""),
        pv("Cov(A15,A32)", -592, 105, None, ""),
        pv("Cov(A21,A31)", -1304, 3675, Some(Erratum), e1),
        pv("Cov(A22,A32)", -1304, 3675, Some(Erratum), e1),
        pv("Cov(A23,A33)", -316, 735, Some(Erratum), e2),
        pv("Cov(A24,A33)", -316, 735, Some(Erratum), e2),
        pv("Var(A1)", 4362, 35, Some(OpenQuestion), r4),
        pv("Cov(A1,A2) without nonnegative terms", -4, 3, None, ""),
        pv("Cov(A1,A3) without nonnegative terms", -1184, 105, None, ""),
        pv("Cov(A2,A3)", -824, 525, Some(Erratum), "inherits Cov(A21,A31) and Cov(A23,A33)"),
        pv(
            "Var(I4)/vol lower bound",
            7691,
            350,
            Some(OpenQuestion),
            "per unit volume; r^4 overlap and subtotal recombination questions",
        ),
        pv(
            "published subtotals recombined",
            7691,
            350,
            Some(OpenQuestion),
            "per unit volume; 4362/35 - 2(4/3) - 2(1184/105) - 2(824/525), over 4",
        ),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermRow {
    pub label: String,
    pub coefficient: String,
    pub radial: String,
    pub radial_value: f64,
    pub angular: String,
    pub angular_value: String,
    pub constant: f64,
    pub nonnegative_dropped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubtotalRow {
    pub label: String,
    pub value: f64,
    pub paper_value: Option<f64>,
    pub paper_exact: Option<String>,
    pub flag: Flag,
    pub expected_discrepancy: Option<Discrepancy>,
    pub note: String,
}

impl SubtotalRow {
    /// A mismatch not explained by the documented open questions.
    pub fn unexplained_by_open_questions(&self) -> bool {
        self.flag == Flag::Mismatch && self.expected_discrepancy != Some(Discrepancy::OpenQuestion)
    }

    /// A mismatch with no recorded explanation at all.
    pub fn is_regression(&self) -> bool {
        self.flag == Flag::Mismatch && self.expected_discrepancy.is_none()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerReport {
    pub unit: String,
    pub terms: Vec<TermRow>,
    pub subtotals: Vec<SubtotalRow>,
    /// Var(A1) + 2 Cov(A1,A2) + 2 Cov(A1,A3) + 2 Cov(A2,A3) without the dropped terms.
    pub lower_bound_var_2pi_i4: f64,
    pub lower_bound_var_i4_per_vol: f64,
    /// Same sum with the dropped nonnegative terms restored.
    pub full_var_i4_per_vol_published_coefficients: f64,
    /// Complete fourth chaos with exact det_perp coefficients.
    pub exact_var_i4_per_vol: f64,
    pub paper_var_i4_per_vol: f64,
    pub positive: bool,
}

const COMPARE_RTOL: f64 = 1e-6;

fn compare(label: &str, value: f64, published: Option<&PaperValue>) -> SubtotalRow {
    match published {
        None => SubtotalRow {
            label: label.into(),
            value,
            paper_value: None,
            paper_exact: None,
            flag: Flag::NotApplicable,
            expected_discrepancy: None,
            note: String::new(),
        },
        Some(p) => {
            let pv = rat_to_f64(&p.value);
            let ok = (value - pv).abs() <= COMPARE_RTOL * pv.abs().max(1e-12);
            SubtotalRow {
                label: label.into(),
                value,
                paper_value: Some(pv),
                paper_exact: Some(rat_string(&p.value)),
                flag: if ok { Flag::Ok } else { Flag::Mismatch },
                expected_discrepancy: p.expected,
                note: p.note.into(),
            }
        }
    }
}

fn group_of(block: &str) -> usize {
    block.as_bytes()[1] as usize - b'0' as usize
}

fn blocks_of(label: &str) -> (String, String) {
    let inner = &label[4..label.len() - 1];
    match inner.split_once(',') {
        Some((a, b)) => (a.to_string(), b.to_string()),
        None => (inner.to_string(), inner.to_string()),
    }
}

/// Evaluates the catalog, assembles the lower bound and compares with the
/// published constants.
pub fn assemble_lower_bound(tolerance: f64) -> Result<LedgerReport> {
    let catalog = i4_term_catalog();
    let mut cache: HashMap<RadialKernelSpec, f64> = HashMap::new();
    let mut radial = |s: &RadialKernelSpec| -> Result<f64> {
        if let Some(v) = cache.get(s) {
            return Ok(*v);
        }
        let v = radial_integral(s, tolerance)?.value;
        cache.insert(s.clone(), v);
        Ok(v)
    };
    let mut rows = Vec::new();
    let mut per_pair: BTreeMap<String, (f64, bool)> = BTreeMap::new();
    for t in &catalog {
        let rv = radial(&t.radial)?;
        let ang = angular_pattern_sum(&t.angular)?;
        let c = rat_to_f64(&term_rational_factor(t)?) * rv / PI;
        rows.push(TermRow {
            label: t.label.clone(),
            coefficient: rat_string(&t.coefficient),
            radial: t.radial.to_string(),
            radial_value: rv,
            angular: t.angular.to_string(),
            angular_value: ang.to_string(),
            constant: c,
            nonnegative_dropped: t.sign_known_nonnegative,
        });
        let e = per_pair.entry(t.label.clone()).or_insert((0.0, t.sign_known_nonnegative));
        e.0 += c;
    }

    // Group sums: (group_i, group_j) -> (all terms, kept terms).
    let mut groups: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (label, (v, nonneg)) in &per_pair {
        let (a, b) = blocks_of(label);
        let (ga, gb) = (group_of(&a), group_of(&b));
        let key = (ga.min(gb), ga.max(gb));
        // Within a group an off-diagonal pair appears twice in the variance.
        let w = if a != b && ga == gb { 2.0 } else { 1.0 };
        let e = groups.entry(key).or_insert((0.0, 0.0));
        e.0 += w * v;
        if !nonneg {
            e.1 += w * v;
        }
    }
    let g = |i, j| groups.get(&(i, j)).copied().unwrap_or((0.0, 0.0));
    let lower = g(1, 1).1 + 2.0 * (g(1, 2).1 + g(1, 3).1 + g(2, 3).1);
    let full = g(1, 1).0 + g(2, 2).0 + g(3, 3).0 + 2.0 * (g(1, 2).0 + g(1, 3).0 + g(2, 3).0);

    let published = paper_values();
    let find = |l: &str| published.iter().find(|p| p.label == l);
    let mut subtotals = Vec::new();
    for (label, (v, nonneg)) in &per_pair {
        let mut row = compare(label, *v, find(label));
        if *nonneg && row.paper_value.is_none() {
            row.note = "dropped by the published argument as nonnegative".into();
        }
        subtotals.push(row);
    }
    let named = [
        ("Var(A1)", g(1, 1).0),
        ("Var(A2)", g(2, 2).0),
        ("Var(A3)", g(3, 3).0),
        ("Cov(A1,A2)", g(1, 2).0),
        ("Cov(A1,A3)", g(1, 3).0),
        ("Cov(A2,A3)", g(2, 3).0),
        ("Cov(A1,A2) without nonnegative terms", g(1, 2).1),
        ("Cov(A1,A3) without nonnegative terms", g(1, 3).1),
        ("Var(2pi I4) lower bound", lower),
        ("Var(I4)/vol lower bound", var_i4_per_volume(lower)),
    ];
    for (label, v) in named {
        subtotals.push(compare(label, v, find(label)));
    }
    let recombined = rat(4362, 35) - rat(8, 3) - rat(2368, 105) - rat(1648, 525);
    subtotals.push(compare(
        "published subtotals recombined",
        var_i4_per_volume(rat_to_f64(&recombined)),
        find("published subtotals recombined"),
    ));

    let mut exact = 0.0;
    for t in exact_i4_catalog()? {
        exact += rat_to_f64(&term_rational_factor(&t)?) * radial(&t.radial)? / PI;
    }
    let exact_row = compare("exact-coefficient Var(I4)/vol", var_i4_per_volume(exact), None);
    subtotals.push(exact_row);

    Ok(LedgerReport {
        unit: "4 pi^3 R^3 / 3 (Var(2 pi I4)); per-volume rows are Var(I4)/vol".into(),
        terms: rows,
        subtotals,
        lower_bound_var_2pi_i4: lower,
        lower_bound_var_i4_per_vol: var_i4_per_volume(lower),
        full_var_i4_per_vol_published_coefficients: var_i4_per_volume(full),
        exact_var_i4_per_vol: var_i4_per_volume(exact),
        paper_var_i4_per_vol: 7691.0 / 350.0,
        positive: lower > 0.0,
    })
}

impl LedgerReport {
    pub fn subtotal(&self, label: &str) -> Option<&SubtotalRow> {
        self.subtotals.iter().find(|s| s.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
