//! Hermite polynomials, the sinc covariance with its derivatives, the A/B
//! kernels, Gaussian half-moments and Bessel J0.

use crate::error::{Result, RwmError};
use crate::scalar::{rat, Rational, Real};
use serde::{Deserialize, Serialize};

/// Multi-index in N^m.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HermiteIndex {
    pub alpha: Vec<u32>,
}

impl HermiteIndex {
    pub fn new(alpha: Vec<u32>) -> Self {
        HermiteIndex { alpha }
    }

    pub fn zeros(m: usize) -> Self {
        HermiteIndex { alpha: vec![0; m] }
    }

    /// `p * e_k` in N^m (k is 0-based).
    pub fn unit(m: usize, k: usize, p: u32) -> Self {
        let mut alpha = vec![0; m];
        alpha[k] = p;
        HermiteIndex { alpha }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn order(&self) -> u32 {
        self.alpha.iter().sum()
    }

    /// alpha! = prod alpha_i!
    pub fn factorial(&self) -> u128 {
        self.alpha.iter().map(|&a| factorial(a)).product()
    }
}

pub fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

/// Probabilists' Hermite polynomial by forward recurrence.
pub fn hermite<T: Real>(n: u32, x: T) -> T {
    let mut h0 = T::one();
    if n == 0 {
        return h0;
    }
    let mut h1 = x;
    for k in 2..=n {
        let h2 = x * h1 - T::from_u32(k - 1).unwrap() * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Fills `out[0..=n]` with H_0(x)..H_n(x).
pub fn hermite_table<T: Real>(x: T, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    out[0] = T::one();
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 2..out.len() {
        out[k] = x * out[k - 1] - T::from_usize_exact(k - 1) * out[k - 2];
    }
}

/// Monomial coefficients of H_n, lowest degree first.
pub fn hermite_monomials(n: u32) -> Vec<i64> {
    let mut prev: Vec<i64> = vec![1];
    if n == 0 {
        return prev;
    }
    let mut cur: Vec<i64> = vec![0, 1];
    for k in 2..=n as usize {
        let mut next = vec![0i64; k + 1];
        for (d, c) in cur.iter().enumerate() {
            next[d + 1] += c;
        }
        for (d, c) in prev.iter().enumerate() {
            next[d] -= (k as i64 - 1) * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

pub fn multi_hermite<T: Real>(alpha: &HermiteIndex, y: &[T]) -> Result<T> {
    if alpha.len() != y.len() {
        return Err(RwmError::Dimension {
            expected: alpha.len(),
            got: y.len(),
        });
    }
    Ok(alpha
        .alpha
        .iter()
        .zip(y)
        .fold(T::one(), |acc, (&a, &v)| acc * hermite(a, v)))
}

/// H_alpha(0) / alpha! as an exact rational (the delta coefficient without 1/sqrt(2 pi)).
pub fn delta_coefficient_rational(alpha: u32) -> Rational {
    if alpha % 2 == 1 {
        return rat(0, 1);
    }
    // H_{2m}(0) = (-1)^m (2m-1)!!
    let m = alpha / 2;
    let dfact: i128 = (1..=m as i128).map(|j| 2 * j - 1).product();
    let sign = if m % 2 == 0 { 1 } else { -1 };
    rat(sign * dfact, factorial(alpha) as i128)
}

/// b_alpha = H_alpha(0) / (alpha! sqrt(2 pi)).
pub fn delta_coefficient<T: Real>(alpha: u32) -> T {
    let q = delta_coefficient_rational(alpha);
    let num = T::from_i128(*q.numer()).unwrap();
    let den = T::from_i128(*q.denom()).unwrap();
    num / den / (T::lit(2.0) * T::PI()).sqrt()
}

/// sinc and derivatives at u, plus the A and B kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue<T> {
    pub r: T,
    pub r1: T,
    pub r2: T,
    pub a: T,
    pub b: T,
}

pub const SERIES_THRESHOLD: f64 = 1e-2;
const SERIES_TERMS: usize = 5;

fn sinc_series<T: Real>(u: T) -> KernelValue<T> {
    // sinc = sum (-1)^n u^{2n} / (2n+1)!, differentiated termwise.
    let u2 = u * u;
    let mut inv_fact = T::one(); // 1/(2n+1)!
    let mut pow = T::one(); // u^{2n-2}, starting at n = 1 below
    let mut r = T::one();
    let mut r1 = T::zero();
    let mut r2 = T::zero();
    let mut b = T::zero();
    let mut a = T::zero();
    for n in 1..=SERIES_TERMS {
        let nf = T::from_usize_exact(n);
        let two_n = nf + nf;
        inv_fact = inv_fact / ((two_n) * (two_n + T::one()));
        let sign = if n % 2 == 1 { -T::one() } else { T::one() };
        let c = sign * inv_fact;
        r = r + c * pow * u2;
        r1 = r1 + c * two_n * pow * u;
        let c2 = c * two_n * (two_n - T::one());
        r2 = r2 + c2 * pow;
        let cb = c * two_n;
        b = b + cb * pow;
        a = a + (cb - c2) * pow;
        pow = pow * u2;
    }
    KernelValue { r, r1, r2, a, b }
}

/// Evaluates sinc(u) = sin u / u and the derived kernels at u >= 0.
pub fn sinc_kernel<T: Real>(u: T) -> KernelValue<T> {
    let u = u.abs();
    if u < T::lit(SERIES_THRESHOLD) {
        return sinc_series(u);
    }
    let (s, c) = u.sin_cos();
    let u2 = u * u;
    let u3 = u2 * u;
    let three = T::lit(3.0);
    let r = s / u;
    let r1 = (u * c - s) / u2;
    let b = (u * c - s) / u3;
    let a = (u2 * s - three * s + three * u * c) / u3;
    KernelValue {
        r,
        r1,
        r2: b - a,
        a,
        b,
    }
}

/// m_k = int_0^inf rho^k phi(rho) d rho via m_{k+1} = k m_{k-1}.
pub fn gaussian_half_moment<T: Real>(k: u32) -> T {
    let m0 = T::lit(0.5);
    let m1 = T::one() / (T::lit(2.0) * T::PI()).sqrt();
    let (mut lo, mut hi) = (m0, m1);
    if k == 0 {
        return m0;
    }
    for j in 1..k {
        let next = T::from_u32(j).unwrap() * lo;
        lo = hi;
        hi = next;
    }
    hi
}

/// Exact m_k / m_j for k, j of equal parity.
pub fn half_moment_ratio(k: u32, j: u32) -> Result<Rational> {
    if k % 2 != j % 2 {
        return Err(RwmError::Domain(format!(
            "m_{k}/m_{j}: ratio is only rational for equal parity"
        )));
    }
    let (top, bottom, invert) = if k >= j { (k, j, false) } else { (j, k, true) };
    let mut q = rat(1, 1);
    let mut i = bottom + 1;
    while i < top {
        q *= rat(i as i128, 1);
        i += 2;
    }
    Ok(if invert { q.recip() } else { q })
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 1.0f64;
    while term.abs() > 1e-18 * sum.abs().max(1e-300) || k < 4.0 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    sum
}

fn j0_miller(x: f64) -> f64 {
    let start = 2 * ((x as usize + 20 + (40.0 * x).sqrt() as usize) / 2);
    let mut jp1 = 0.0f64;
    let mut j = 1e-30f64;
    let mut norm = 0.0;
    let mut j0 = 0.0;
    for k in (0..start).rev() {
        let jm1 = 2.0 * (k as f64 + 1.0) / x * j - jp1;
        jp1 = j;
        j = jm1;
        if k == 0 {
            j0 = j;
            norm += j;
        } else if k % 2 == 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
        }
    }
    j0 / norm
}

fn j0_asymptotic(x: f64) -> f64 {
    // Hankel expansion with mu = 0: a_k = prod_{i=1..k} (2i-1)^2 / (k! 8^k).
    let mut p = 1.0;
    let mut qq = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let kf = k as f64;
        a *= -(2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
        if a.abs() >= last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => qq += a,
            2 => p -= a,
            3 => qq -= a,
            _ => p += a,
        }
        if a.abs() < 1e-18 {
            break;
        }
    }
    // With the signs folded into a, P = sum (-1)^m a_{2m}, Q = sum (-1)^m a_{2m+1}.
    let chi = x - std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - qq * chi.sin())
}

/// Bessel J0 for x >= 0: series up to 12, Miller recurrence up to 50,
/// Hankel asymptotics beyond.
pub fn bessel_j0<T: Real>(x: T) -> T {
    let xf = x.abs().to_f64().unwrap();
    let v = if xf <= 12.0 {
        j0_series(xf)
    } else if xf <= 50.0 {
        j0_miller(xf)
    } else {
        j0_asymptotic(xf)
    };
    T::lit(v)
}
