//! Hermite coefficients of det_perp(z1, z2) = |z1 x z2| and the composite
//! chaos coefficients c_alpha.

use crate::error::{Result, RwmError};
use crate::kernels::{
    delta_coefficient_rational, half_moment_ratio, hermite_monomials, hermite_table,
    HermiteIndex,
};
use crate::rng::stream_rng;
use crate::scalar::{rat, rat_to_f64, Rational, Real};
use crate::stats::RunningMoments;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPair<T> {
    pub z1: [T; 3],
    pub z2: [T; 3],
}

impl<T: Real> GradientPair<T> {
    pub fn from_slice(z: &[T]) -> Self {
        GradientPair {
            z1: [z[0], z[1], z[2]],
            z2: [z[3], z[4], z[5]],
        }
    }
}

/// |z1 x z2|.
pub fn det_perp<T: Real>(p: &GradientPair<T>) -> T {
    let [a1, a2, a3] = p.z1;
    let [b1, b2, b3] = p.z2;
    let c1 = a2 * b3 - a3 * b2;
    let c2 = a3 * b1 - a1 * b3;
    let c3 = a1 * b2 - a2 * b1;
    (c1 * c1 + c2 * c2 + c3 * c3).sqrt()
}

/// Which set of a-coefficients to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Normalization {
    /// The published closed forms (four families only).
    AsPublished,
    /// E[det_perp(Z) H_alpha(Z)] / alpha! computed exactly for |alpha| <= 4.
    Exact,
}

fn check_len(alpha: &HermiteIndex, m: usize) -> Result<()> {
    if alpha.len() != m {
        return Err(RwmError::Dimension {
            expected: m,
            got: alpha.len(),
        });
    }
    Ok(())
}

/// Published closed forms, built from the half-moment ratios.
pub fn a_coefficient(alpha: &HermiteIndex) -> Result<Rational> {
    check_len(alpha, 6)?;
    let a0 = rat(1, 1);
    let r5 = half_moment_ratio(5, 3)?;
    let r7 = half_moment_ratio(7, 3)?;
    let mut nz: Vec<u32> = alpha.alpha.iter().copied().filter(|&a| a != 0).collect();
    nz.sort_unstable();
    match nz.as_slice() {
        [] => Ok(a0),
        [2] => Ok(rat(1, 3) * r5 * a0 - a0),
        [2, 2] => Ok(rat(1, 9) * r5 * r5 * a0 - rat(2, 3) - a0),
        [4] => Ok(rat(1, 3) * r7 * a0 - rat(2, 9) * r5 * r5 * a0 - rat(2, 1) * r5 * a0
            + rat(3, 1) * a0),
        _ => Err(RwmError::Unsupported(format!(
            "a-coefficient for {:?} is outside the published families",
            alpha.alpha
        ))),
    }
}

// E[det_perp(Z) z1_a z1_b] = (8/3) delta_ab, and the rank-4 analogues below.
fn det_tensor_moment(z1_axes: &[usize], z2_axes: &[usize]) -> Result<Rational> {
    let d = |i: usize, j: usize| if i == j { rat(1, 1) } else { rat(0, 1) };
    let pairings4 = |a: &[usize]| d(a[0], a[1]) * d(a[2], a[3]) + d(a[0], a[2]) * d(a[1], a[3])
        + d(a[0], a[3]) * d(a[1], a[2]);
    match (z1_axes.len(), z2_axes.len()) {
        (0, 0) => Ok(rat(2, 1)),
        (2, 0) => Ok(rat(8, 3) * d(z1_axes[0], z1_axes[1])),
        (0, 2) => Ok(rat(8, 3) * d(z2_axes[0], z2_axes[1])),
        (4, 0) => Ok(rat(16, 5) * pairings4(z1_axes)),
        (0, 4) => Ok(rat(16, 5) * pairings4(z2_axes)),
        (2, 2) => {
            let (a, b) = (z1_axes, z2_axes);
            Ok(rat(56, 15) * d(a[0], a[1]) * d(b[0], b[1])
                - rat(4, 15) * (d(a[0], b[0]) * d(a[1], b[1]) + d(a[0], b[1]) * d(a[1], b[0])))
        }
        (p, q) if p % 2 == 1 || q % 2 == 1 => Ok(rat(0, 1)),
        (p, q) => Err(RwmError::Unsupported(format!(
            "det_perp moment of degree ({p},{q})"
        ))),
    }
}

/// E[det_perp(Z) z^e] for an exponent vector over (z1, z2).
fn det_monomial_moment(e: &[u32]) -> Result<Rational> {
    let mut z1 = Vec::new();
    let mut z2 = Vec::new();
    for (i, &p) in e.iter().enumerate() {
        let axes = if i < 3 { &mut z1 } else { &mut z2 };
        for _ in 0..p {
            axes.push(i % 3);
        }
    }
    det_tensor_moment(&z1, &z2)
}

/// E[det_perp(Z) H_alpha(Z)] / alpha! for any alpha in N^6 with |alpha| <= 4.
///
/// The moments of det_perp against monomials follow from rotation invariance:
/// E det = 2, E det |z1|^2 = 8, E det |z1|^4 = 48, E det |z1|^2|z2|^2 = 32,
/// E det (z1.z2)^2 = 8.
pub fn a_coefficient_exact(alpha: &HermiteIndex) -> Result<Rational> {
    check_len(alpha, 6)?;
    if alpha.order() > 4 {
        return Err(RwmError::Unsupported(format!(
            "exact a-coefficient needs |alpha| <= 4, got {}",
            alpha.order()
        )));
    }
    let polys: Vec<Vec<i64>> = alpha.alpha.iter().map(|&a| hermite_monomials(a)).collect();
    let mut total = rat(0, 1);
    let mut e = [0u32; 6];
    fn rec(
        i: usize,
        polys: &[Vec<i64>],
        e: &mut [u32; 6],
        coef: i128,
        total: &mut Rational,
    ) -> Result<()> {
        if i == 6 {
            *total += det_monomial_moment(e)? * rat(coef, 1);
            return Ok(());
        }
        for (deg, &c) in polys[i].iter().enumerate() {
            if c != 0 {
                e[i] = deg as u32;
                rec(i + 1, polys, e, coef * c as i128, total)?;
            }
        }
        Ok(())
    }
    rec(0, &polys, &mut e, 1, &mut total)?;
    Ok(total / rat(alpha.factorial() as i128, 1))
}

pub fn a_coefficient_with(alpha: &HermiteIndex, norm: Normalization) -> Result<Rational> {
    match norm {
        Normalization::AsPublished => a_coefficient(alpha),
        Normalization::Exact => a_coefficient_exact(alpha),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

const MC_BLOCK: u64 = 1 << 16;

/// Monte Carlo estimate of E[det_perp(Z) H_alpha(Z)] / alpha!, Z ~ N(0, I_6).
pub fn mc_a_coefficient(alpha: &HermiteIndex, n: u64, seed: u64) -> Result<CoefficientEstimate> {
    check_len(alpha, 6)?;
    if n < 10_000 {
        return Err(RwmError::Domain(format!("n = {n} < 1e4")));
    }
    let inv_fact = 1.0 / alpha.factorial() as f64;
    let top = *alpha.alpha.iter().max().unwrap() as usize;
    let blocks = n.div_ceil(MC_BLOCK);
    let partial: Vec<RunningMoments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let len = MC_BLOCK.min(n - b * MC_BLOCK);
            let mut acc = RunningMoments::new();
            let mut z = [0.0f64; 6];
            let mut h = vec![0.0f64; top + 1];
            for _ in 0..len {
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let mut prod = det_perp(&GradientPair::from_slice(&z)) * inv_fact;
                for (k, &a) in alpha.alpha.iter().enumerate() {
                    if a > 0 {
                        hermite_table(z[k], &mut h[..=a as usize]);
                        prod *= h[a as usize];
                    }
                }
                acc.push(prod);
            }
            acc
        })
        .collect();
    let mut total = RunningMoments::new();
    for p in &partial {
        total.merge(p);
    }
    Ok(CoefficientEstimate {
        value: total.mean(),
        stderr: total.stderr_mean(),
        n_samples: n,
        seed,
    })
}

/// 2 pi c_alpha as an exact rational: c_alpha = b_{a1} b_{a2} a_tail with
/// b_k = H_k(0) / (k! sqrt(2 pi)).
pub fn c_coefficient_two_pi(alpha: &HermiteIndex, norm: Normalization) -> Result<Rational> {
    check_len(alpha, 8)?;
    if alpha.order() > 4 {
        return Err(RwmError::Unsupported(format!(
            "c-coefficient needs |alpha| <= 4, got {}",
            alpha.order()
        )));
    }
    let b = delta_coefficient_rational(alpha.alpha[0]) * delta_coefficient_rational(alpha.alpha[1]);
    if b == rat(0, 1) {
        return Ok(b);
    }
    let tail = HermiteIndex::new(alpha.alpha[2..].to_vec());
    Ok(b * a_coefficient_with(&tail, norm)?)
}

/// c_alpha with the published a-coefficients.
pub fn c_coefficient(alpha: &HermiteIndex) -> Result<f64> {
    c_coefficient_with(alpha, Normalization::AsPublished)
}

pub fn c_coefficient_with(alpha: &HermiteIndex, norm: Normalization) -> Result<f64> {
    Ok(rat_to_f64(&c_coefficient_two_pi(alpha, norm)?) / (2.0 * std::f64::consts::PI))
}

/// All alpha in N^8 with |alpha| = order and nonzero c_alpha, with 2 pi c_alpha.
pub fn chaos_multi_indices(order: u32, norm: Normalization) -> Result<Vec<(HermiteIndex, Rational)>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; 8];
    fn rec(
        i: usize,
        left: u32,
        cur: &mut Vec<u32>,
        norm: Normalization,
        out: &mut Vec<(HermiteIndex, Rational)>,
    ) -> Result<()> {
        if i == 7 {
            cur[7] = left;
            let alpha = HermiteIndex::new(cur.clone());
            let c = match c_coefficient_two_pi(&alpha, norm) {
                Ok(c) => c,
                // Published families do not cover every tail; those have no
                // published value and are left out of the as-published chaos.
                Err(RwmError::Unsupported(_)) => rat(0, 1),
                Err(e) => return Err(e),
            };
            if c != rat(0, 1) {
                out.push((alpha, c));
            }
            return Ok(());
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, norm, out)?;
        }
        Ok(())
    }
    rec(0, order, &mut cur, norm, &mut out)?;
    Ok(out)
}

fn check_correlations(c: &[Vec<f64>], n: usize) -> Result<()> {
    if c.len() != n || c.iter().any(|row| row.len() != n) {
        return Err(RwmError::Dimension {
            expected: n,
            got: c.len(),
        });
    }
    for i in 0..n {
        if (c[i][i] - 1.0).abs() > 1e-12 {
            return Err(RwmError::Validation("correlation diagonal must be 1".into()));
        }
        for j in 0..n {
            if (c[i][j] - c[j][i]).abs() > 1e-12 || c[i][j].abs() > 1.0 + 1e-12 {
                return Err(RwmError::Validation(
                    "correlations must be symmetric with entries in [-1, 1]".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Closed forms for E[prod H_{n_i}(X_i)] of standard Gaussians.
pub fn hermite_product_moment(orders: &[u32], corr: &[Vec<f64>]) -> Result<f64> {
    check_correlations(corr, orders.len())?;
    let c = |i: usize, j: usize| corr[i][j];
    let need_zero = |pairs: &[(usize, usize)]| -> Result<()> {
        if pairs.iter().any(|&(i, j)| c(i, j).abs() > 1e-12) {
            return Err(RwmError::Unsupported(
                "formula assumes the listed pairs are uncorrelated".into(),
            ));
        }
        Ok(())
    };
    match orders {
        [p, q] => Ok(if p == q {
            crate::kernels::factorial(*p) as f64 * c(0, 1).powi(*p as i32)
        } else {
            0.0
        }),
        [2, 2, 2, 2] => {
            need_zero(&[(0, 1), (2, 3)])?;
            Ok(4.0 * c(0, 2).powi(2) * c(1, 3).powi(2)
                + 4.0 * c(0, 3).powi(2) * c(1, 2).powi(2)
                + 16.0 * c(0, 2) * c(0, 3) * c(1, 2) * c(1, 3))
        }
        [2, 2, 4] => {
            need_zero(&[(0, 1)])?;
            Ok(24.0 * c(0, 2).powi(2) * c(1, 2).powi(2))
        }
        [1, 1, 1, 1] => {
            need_zero(&[(0, 1), (2, 3)])?;
            Ok(c(0, 2) * c(1, 3) + c(0, 3) * c(1, 2))
        }
        _ => Err(RwmError::Unsupported(format!(
            "no closed form for orders {orders:?}"
        ))),
    }
}
