//! Integrals over S^2 of even monomials in the direction components.

use crate::error::{Result, RwmError};
use crate::quad::gauss_legendre;
use crate::scalar::{rat, rat_to_f64, Rational, Real};
use serde::{Deserialize, Serialize};
use std::fmt;

/// An exact value `q * pi` with rational q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PiMultiple(pub Rational);

impl PiMultiple {
    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }
    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }
    pub fn value<T: Real>(&self) -> T {
        T::lit(rat_to_f64(&self.0)) * T::PI()
    }
    pub fn scale(&self, k: i128) -> PiMultiple {
        PiMultiple(self.0 * rat(k, 1))
    }
}

impl fmt::Display for PiMultiple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}pi/{}", self.numer(), self.denom())
    }
}

fn double_factorial_odd(n: i128) -> i128 {
    // (n)!! for odd n >= -1
    let mut p = 1;
    let mut k = n;
    while k > 1 {
        p *= k;
        k -= 2;
    }
    p
}

/// int_{S^2} u1^{2a} u2^{2b} u3^{2c} d sigma
///   = 4 pi (2a-1)!! (2b-1)!! (2c-1)!! / (2a+2b+2c+1)!!
pub fn sphere_monomial_moment(a: u32, b: u32, c: u32) -> PiMultiple {
    let (a, b, c) = (a as i128, b as i128, c as i128);
    let num = 4
        * double_factorial_odd(2 * a - 1)
        * double_factorial_odd(2 * b - 1)
        * double_factorial_odd(2 * c - 1);
    PiMultiple(rat(num, double_factorial_odd(2 * (a + b + c) + 1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Summation {
    /// Fixed axes: exponents apply to Delta_1, Delta_2, Delta_3 in order.
    Single,
    /// sum_k Delta_k^e
    SumOverK,
    /// sum over ordered i != j of Delta_i^e1 Delta_j^e2
    SumOverDistinctPairs,
    /// sum over ordered distinct (i, j, k) of Delta_i^e1 Delta_j^e2 Delta_k^e3
    SumOverDistinctTriples,
}

/// Angular factor of a ledger term. Zero exponents are accepted so that
/// plain index multiplicities (e.g. sum_k 1 = 3) stay expressible.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AngularPattern {
    pub exponents: Vec<u32>,
    pub summation: Summation,
}

impl AngularPattern {
    pub fn new(summation: Summation, exponents: Vec<u32>) -> Result<Self> {
        let want = match summation {
            Summation::Single | Summation::SumOverDistinctTriples => 3,
            Summation::SumOverK => 1,
            Summation::SumOverDistinctPairs => 2,
        };
        if exponents.len() != want {
            return Err(RwmError::Validation(format!(
                "{summation:?} takes {want} exponents, got {}",
                exponents.len()
            )));
        }
        if let Some(e) = exponents.iter().find(|e| *e % 2 == 1) {
            return Err(RwmError::Validation(format!(
                "odd angular exponent {e} (vanishes by symmetry; likely a ledger bug)"
            )));
        }
        Ok(AngularPattern {
            exponents,
            summation,
        })
    }

    pub fn sum_over_k(e: u32) -> Result<Self> {
        Self::new(Summation::SumOverK, vec![e])
    }

    pub fn pairs(e1: u32, e2: u32) -> Result<Self> {
        Self::new(Summation::SumOverDistinctPairs, vec![e1, e2])
    }

    pub fn triples(e1: u32, e2: u32, e3: u32) -> Result<Self> {
        Self::new(Summation::SumOverDistinctTriples, vec![e1, e2, e3])
    }

    pub fn single(e1: u32, e2: u32, e3: u32) -> Result<Self> {
        Self::new(Summation::Single, vec![e1, e2, e3])
    }
}

impl fmt::Display for AngularPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.exponents;
        match self.summation {
            Summation::Single => write!(f, "D1^{} D2^{} D3^{}", e[0], e[1], e[2]),
            Summation::SumOverK => write!(f, "sum_k Dk^{}", e[0]),
            Summation::SumOverDistinctPairs => write!(f, "sum_{{i!=j}} Di^{} Dj^{}", e[0], e[1]),
            Summation::SumOverDistinctTriples => {
                write!(f, "sum_{{i,j,k distinct}} Di^{} Dj^{} Dk^{}", e[0], e[1], e[2])
            }
        }
    }
}

/// Summed angular integral of a pattern, exactly.
pub fn angular_pattern_sum(p: &AngularPattern) -> Result<PiMultiple> {
    let p = AngularPattern::new(p.summation, p.exponents.clone())?;
    let h: Vec<u32> = p.exponents.iter().map(|e| e / 2).collect();
    Ok(match p.summation {
        Summation::Single => sphere_monomial_moment(h[0], h[1], h[2]),
        Summation::SumOverK => sphere_monomial_moment(h[0], 0, 0).scale(3),
        Summation::SumOverDistinctPairs => sphere_monomial_moment(h[0], h[1], 0).scale(6),
        Summation::SumOverDistinctTriples => sphere_monomial_moment(h[0], h[1], h[2]).scale(6),
    })
}

/// Gauss-Legendre in cos(theta) times trapezoid in phi.
pub fn sphere_quadrature_moment(a: u32, b: u32, c: u32, resolution: usize) -> Result<f64> {
    if resolution < 8 {
        return Err(RwmError::Domain(format!("resolution {resolution} < 8")));
    }
    let (t, w) = gauss_legendre(resolution);
    let nphi = 2 * resolution;
    let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
    let mut total = 0.0;
    for (ti, wi) in t.iter().zip(&w) {
        let s = (1.0 - ti * ti).sqrt();
        let mut ring = 0.0;
        for j in 0..nphi {
            let phi = j as f64 * dphi;
            let u1 = s * phi.cos();
            let u2 = s * phi.sin();
            ring += u1.powi(2 * a as i32) * u2.powi(2 * b as i32);
        }
        total += wi * ti.powi(2 * c as i32) * ring * dphi;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pim(n: i128, d: i128) -> PiMultiple {
        PiMultiple(rat(n, d))
    }

    #[test]
    fn monomial_examples() {
        assert_eq!(sphere_monomial_moment(0, 0, 0), pim(4, 1));
        assert_eq!(sphere_monomial_moment(2, 0, 0), pim(4, 5));
        assert_eq!(sphere_monomial_moment(2, 2, 0), pim(4, 105));
    }

    #[test]
    fn pattern_examples() {
        let s = |p: AngularPattern| angular_pattern_sum(&p).unwrap();
        assert_eq!(s(AngularPattern::sum_over_k(4).unwrap()), pim(12, 5));
        assert_eq!(s(AngularPattern::sum_over_k(8).unwrap()), pim(12, 9));
        assert_eq!(s(AngularPattern::sum_over_k(2).unwrap()), pim(4, 1));
        assert_eq!(s(AngularPattern::sum_over_k(0).unwrap()), pim(12, 1));
        assert_eq!(s(AngularPattern::pairs(0, 2).unwrap()), pim(8, 1));
    }

    #[test]
    fn odd_exponent_rejected() {
        assert!(AngularPattern::sum_over_k(3).is_err());
        assert!(AngularPattern::pairs(2, 1).is_err());
        assert!(AngularPattern::new(Summation::SumOverK, vec![2, 2]).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let pi = std::f64::consts::PI;
        assert!((sphere_quadrature_moment(2, 0, 0, 32).unwrap() - 4.0 * pi / 5.0).abs() < 1e-10);
        assert!((sphere_quadrature_moment(4, 0, 0, 32).unwrap() - 4.0 * pi / 9.0).abs() < 1e-10);
        for res in [8, 9, 20] {
            assert!((sphere_quadrature_moment(0, 0, 0, res).unwrap() - 4.0 * pi).abs() < 1e-12);
        }
        assert!(sphere_quadrature_moment(0, 0, 0, 7).is_err());
    }
}
