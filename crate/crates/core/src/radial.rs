//! Radial integrals int_0^inf g(rho) rho^w d rho of products of the sinc
//! kernels, and overlap integrals over B_R x B_R.
//!
//! On [0, K pi] the integrand is integrated with adaptive Gauss-Kronrod on
//! period cells. Beyond K pi every kernel is an exact trigonometric Laurent
//! form (e.g. A = s/rho + 3c/rho^2 - 3s/rho^3), so the tail is a finite sum of
//! int_X^inf e^{i m rho} rho^{-j} d rho, each evaluated by its integration by
//! parts series.

use crate::error::{Result, RwmError};
use crate::kernels::sinc_kernel;
use crate::quad::adaptive;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kernel {
    Sinc,
    DSinc,
    A,
    B,
}

impl Kernel {
    /// Power of 1/rho governing the decay at infinity.
    pub fn decay_order(self) -> i32 {
        match self {
            Kernel::Sinc | Kernel::DSinc | Kernel::A => 1,
            Kernel::B => 2,
        }
    }

    pub fn eval(self, rho: f64) -> f64 {
        let k = sinc_kernel(rho);
        match self {
            Kernel::Sinc => k.r,
            Kernel::DSinc => k.r1,
            Kernel::A => k.a,
            Kernel::B => k.b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Sinc => "sinc",
            Kernel::DSinc => "dsinc",
            Kernel::A => "A",
            Kernel::B => "B",
        }
    }

    /// Coefficients of s = sin(rho), c = cos(rho) times rho^{-j}: (s coef, c coef, j).
    fn trig_laurent(self) -> &'static [(f64, f64, i32)] {
        match self {
            Kernel::Sinc => &[(1.0, 0.0, 1)],
            Kernel::DSinc => &[(0.0, 1.0, 1), (-1.0, 0.0, 2)],
            Kernel::A => &[(1.0, 0.0, 1), (0.0, 3.0, 2), (-3.0, 0.0, 3)],
            Kernel::B => &[(0.0, 1.0, 2), (-1.0, 0.0, 3)],
        }
    }
}

/// Product of kernel powers times rho^weight_exponent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RadialKernelSpec {
    pub factors: Vec<(Kernel, u32)>,
    pub weight_exponent: i32,
}

impl RadialKernelSpec {
    /// Validated constructor for improper integrals on [0, inf).
    pub fn new(factors: Vec<(Kernel, u32)>, weight_exponent: i32) -> Result<Self> {
        let spec = Self::finite_domain(factors, weight_exponent);
        if !spec.is_convergent() {
            return Err(RwmError::Validation(format!(
                "{spec}: decay degree {} < 2, tail not absolutely integrable",
                spec.decay_degree()
            )));
        }
        Ok(spec)
    }

    /// Unchecked constructor for integrands used only on bounded domains.
    pub fn finite_domain(factors: Vec<(Kernel, u32)>, weight_exponent: i32) -> Self {
        let mut merged: BTreeMap<Kernel, u32> = BTreeMap::new();
        for (k, p) in factors {
            if p > 0 {
                *merged.entry(k).or_default() += p;
            }
        }
        RadialKernelSpec {
            factors: merged.into_iter().collect(),
            weight_exponent,
        }
    }

    /// sinc^a dsinc^b A^c B^d rho^2.
    pub fn product(a: u32, b: u32, c: u32, d: u32) -> Self {
        Self::finite_domain(
            vec![
                (Kernel::Sinc, a),
                (Kernel::DSinc, b),
                (Kernel::A, c),
                (Kernel::B, d),
            ],
            2,
        )
    }

    pub fn decay_degree(&self) -> i32 {
        self.factors
            .iter()
            .map(|(k, p)| k.decay_order() * *p as i32)
            .sum::<i32>()
            - self.weight_exponent
    }

    pub fn is_convergent(&self) -> bool {
        self.decay_degree() >= 2
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let k = sinc_kernel(rho);
        let mut v = rho.powi(self.weight_exponent);
        for (kern, p) in &self.factors {
            let x = match kern {
                Kernel::Sinc => k.r,
                Kernel::DSinc => k.r1,
                Kernel::A => k.a,
                Kernel::B => k.b,
            };
            v *= x.powi(*p as i32);
        }
        v
    }

    /// Exact expansion sum c_{m,j} e^{i m rho} rho^{-j}, valid for rho > 0.
    fn fourier_laurent(&self) -> BTreeMap<(i32, i32), Complex64> {
        let mut poly: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
        poly.insert((0, -self.weight_exponent), Complex64::new(1.0, 0.0));
        let half = Complex64::new(0.5, 0.0);
        let half_i = Complex64::new(0.0, 0.5);
        for (kern, p) in &self.factors {
            let mut base: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
            for &(sc, cc, j) in kern.trig_laurent() {
                // s = (e^{i} - e^{-i}) / 2i, c = (e^{i} + e^{-i}) / 2
                let plus = -half_i * sc + half * cc;
                let minus = half_i * sc + half * cc;
                *base.entry((1, j)).or_default() += plus;
                *base.entry((-1, j)).or_default() += minus;
            }
            for _ in 0..*p {
                let mut next: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
                for (&(m1, j1), c1) in &poly {
                    for (&(m2, j2), c2) in &base {
                        *next.entry((m1 + m2, j1 + j2)).or_default() += c1 * c2;
                    }
                }
                next.retain(|_, c| c.norm() > 1e-300);
                poly = next;
            }
        }
        poly
    }
}

impl fmt::Display for RadialKernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .factors
            .iter()
            .map(|(k, p)| {
                if *p == 1 {
                    k.name().to_string()
                } else {
                    format!("{}^{}", k.name(), p)
                }
            })
            .collect();
        if parts.is_empty() {
            parts.push("1".into());
        }
        if self.weight_exponent != 0 {
            parts.push(format!("rho^{}", self.weight_exponent));
        }
        write!(f, "{}", parts.join("*"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub cells_used: usize,
}

/// Number of period cells integrated numerically before the analytic tail.
const TAIL_CELLS: usize = 24;
const MAX_INTERVALS: usize = 20_000;

/// int_X^inf e^{i m rho} rho^{-j} d rho; returns (value, truncation error).
fn tail_term(m: i32, j: i32, x: f64) -> Result<(Complex64, f64)> {
    if m == 0 {
        if j <= 1 {
            return Err(RwmError::Validation(format!(
                "non-oscillatory tail rho^-{j} is not integrable"
            )));
        }
        let v = x.powi(1 - j) / (j - 1) as f64;
        return Ok((Complex64::new(v, 0.0), 0.0));
    }
    let im = Complex64::new(0.0, m as f64);
    let lead = -Complex64::from_polar(1.0, m as f64 * x) / im * x.powi(-j);
    let ratio = Complex64::new(1.0, 0.0) / (im * x);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for n in 0..200 {
        term *= ratio * (j + n) as f64;
        let t = term.norm();
        if t == 0.0 {
            return Ok((lead * sum, 0.0));
        }
        if t >= last {
            return Ok((lead * sum, last * lead.norm()));
        }
        sum += term;
        last = t;
        if t < 1e-18 {
            break;
        }
    }
    Ok((lead * sum, last * lead.norm()))
}

/// Adaptive period-cell quadrature of a convergent spec over [0, inf).
pub fn radial_integral(spec: &RadialKernelSpec, tolerance: f64) -> Result<IntegralResult> {
    if !spec.is_convergent() {
        return Err(RwmError::Validation(format!(
            "{spec}: decay degree {} < 2",
            spec.decay_degree()
        )));
    }
    if tolerance <= 0.0 || !tolerance.is_finite() {
        return Err(RwmError::Domain(format!("tolerance {tolerance}")));
    }
    let x = TAIL_CELLS as f64 * PI;
    let mut tail = Complex64::new(0.0, 0.0);
    let mut tail_err = 0.0;
    for ((m, j), c) in spec.fourier_laurent() {
        let (v, e) = tail_term(m, j, x)?;
        tail += c * v;
        tail_err += c.norm() * e;
    }
    let breaks: Vec<f64> = (0..=TAIL_CELLS).map(|n| n as f64 * PI).collect();
    let f = |rho: f64| spec.eval(rho);
    let budget = (tolerance - tail_err).max(0.5 * tolerance);
    let (head, head_err, cells, ok) = adaptive(&f, &breaks, budget, MAX_INTERVALS);
    let value = head + tail.re;
    let err = head_err + tail_err;
    if !ok || err > tolerance {
        return Err(RwmError::Convergence {
            estimate: value,
            error: err,
            tolerance,
        });
    }
    Ok(IntegralResult {
        value,
        abs_error_estimate: err,
        cells_used: cells,
    })
}

/// vol(B_R intersected with B_R + rho e).
pub fn ball_covariogram(r: f64, rho: f64) -> Result<f64> {
    if r <= 0.0 || !(0.0..=2.0 * r).contains(&rho) {
        return Err(RwmError::Domain(format!(
            "covariogram needs R > 0 and 0 <= rho <= 2R (R={r}, rho={rho})"
        )));
    }
    let t = rho / r;
    Ok(4.0 * PI / 3.0 * r.powi(3) * (1.0 - 0.75 * t + t.powi(3) / 16.0))
}

/// int_{B_R x B_R} g(|x - y|) dx dy = int_0^{2R} g(rho) 4 pi rho^2 gamma_R(rho) d rho,
/// with the spec's weight exponent playing the role of the rho^2.
pub fn overlap_integral(r: f64, spec: &RadialKernelSpec) -> Result<f64> {
    if r <= 0.0 {
        return Err(RwmError::Domain(format!("R = {r}")));
    }
    let mut breaks: Vec<f64> = (0..)
        .map(|n| n as f64 * PI)
        .take_while(|&b| b < 2.0 * r)
        .collect();
    breaks.push(2.0 * r);
    let vol = 4.0 * PI / 3.0 * r.powi(3);
    let f = |rho: f64| {
        let t = rho / r;
        4.0 * PI * spec.eval(rho) * vol * (1.0 - 0.75 * t + t.powi(3) / 16.0)
    };
    let scale = vol * 4.0 * PI * r.powi(spec.weight_exponent.max(0) + 1);
    let tol = 1e-13 * scale.max(1.0);
    let (v, e, _, ok) = adaptive(&f, &breaks, tol, 200_000);
    if !ok {
        return Err(RwmError::Convergence {
            estimate: v,
            error: e,
            tolerance: tol,
        });
    }
    Ok(v)
}

/// c with int_{B_R x B_R} g ~ vol(B_R) c, namely c = 4 pi int_0^inf g rho^2.
pub fn leading_order_constant(spec: &RadialKernelSpec) -> Result<f64> {
    Ok(4.0 * PI * radial_integral(spec, 1e-12)?.value)
}
