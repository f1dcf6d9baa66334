//! Streaming moments with an exact pairwise merge.

use serde::{Deserialize, Serialize};

/// Running mean and central moments up to order four.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::new();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn merge(&mut self, o: &RunningMoments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + o.m3
            + d * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + o.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        self.n += o.n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.n as f64 - 1.0)).max(0.0)
    }

    pub fn stderr_mean(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// Fourth central moment (biased, 1/n normalization).
    pub fn central_moment4(&self) -> f64 {
        self.m4 / self.n as f64
    }

    /// Standard error of the sample variance, sqrt((mu4 - s^4 (n-3)/(n-1)) / n).
    pub fn stderr_variance(&self) -> f64 {
        let n = self.n as f64;
        if self.n < 4 {
            return f64::NAN;
        }
        let s2 = self.variance();
        ((self.central_moment4() - s2 * s2 * (n - 3.0) / (n - 1.0)) / n)
            .max(0.0)
            .sqrt()
    }
}

/// Straight-line fit y = a + b x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_stderr: f64,
}

impl LineFit {
    pub fn t_statistic(&self) -> f64 {
        self.slope / self.slope_stderr
    }
}

/// Weighted least squares with known standard errors on y; the slope error
/// comes from the weights, not from the residuals.
pub fn weighted_line_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> LineFit {
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    LineFit {
        intercept: (sxx * sy - sx * sxy) / det,
        slope,
        slope_stderr: (sw / det).sqrt(),
    }
}

/// Ordinary least squares with the usual residual-based slope error.
pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = if x.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit {
        intercept,
        slope,
        slope_stderr: se,
    }
}
