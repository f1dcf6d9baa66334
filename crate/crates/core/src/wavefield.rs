//! Random wave synthesis: plane-wave superpositions, sampled grids, an exact
//! Gaussian oracle for small point sets, and empirical chaos projections.

use crate::chaos::{chaos_multi_indices, Normalization};
use crate::error::{Result, RwmError};
use crate::kernels::{bessel_j0, hermite_table, sinc_kernel};
use crate::rng::stream_rng;
use crate::scalar::rat_to_f64;
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

pub const DEFAULT_N_WAVES: usize = 256;
pub const DEFAULT_SPACING: f64 = 2.0 * PI / 12.0;

/// xi(x) = sqrt(2/N) sum_n cos(<u_n, x> + phi_n). In 2D the third direction
/// component is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveEnsemble {
    pub dim: usize,
    pub directions: Vec<[f64; 3]>,
    pub phases: Vec<f64>,
    pub amplitude: f64,
    pub seed: u64,
}

impl PlaneWaveEnsemble {
    fn draw(dim: usize, n: usize, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let mut directions = Vec::with_capacity(n);
        let mut phases = Vec::with_capacity(n);
        for _ in 0..n {
            let u = if dim == 3 {
                loop {
                    let g: [f64; 3] = [
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    ];
                    let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                    if norm > 1e-8 {
                        break [g[0] / norm, g[1] / norm, g[2] / norm];
                    }
                }
            } else {
                let t: f64 = rng.gen_range(0.0..2.0 * PI);
                [t.cos(), t.sin(), 0.0]
            };
            directions.push(u);
            phases.push(rng.gen_range(0.0..2.0 * PI));
        }
        PlaneWaveEnsemble {
            dim,
            directions,
            phases,
            amplitude: (2.0 / n as f64).sqrt(),
            seed,
        }
    }

    pub fn n_waves(&self) -> usize {
        self.phases.len()
    }
}

/// Independent ensembles for xi (stream 0) and eta (stream 1).
pub fn sample_ensemble(
    dim: usize,
    n_waves: usize,
    seed: u64,
) -> Result<(PlaneWaveEnsemble, PlaneWaveEnsemble)> {
    if dim != 2 && dim != 3 {
        return Err(RwmError::Validation(format!("dim must be 2 or 3, got {dim}")));
    }
    if n_waves == 0 {
        return Err(RwmError::Validation("n_waves must be >= 1".into()));
    }
    Ok((
        PlaneWaveEnsemble::draw(dim, n_waves, seed, 0),
        PlaneWaveEnsemble::draw(dim, n_waves, seed, 1),
    ))
}

/// Value and gradient at x (missing coordinates are zero).
pub fn eval_field_and_gradient(ens: &PlaneWaveEnsemble, x: &[f64]) -> (f64, [f64; 3]) {
    let p = [
        x.first().copied().unwrap_or(0.0),
        x.get(1).copied().unwrap_or(0.0),
        x.get(2).copied().unwrap_or(0.0),
    ];
    let mut v = 0.0;
    let mut g = [0.0; 3];
    for (u, phi) in ens.directions.iter().zip(&ens.phases) {
        let arg = u[0] * p[0] + u[1] * p[1] + u[2] * p[2] + phi;
        let (s, c) = arg.sin_cos();
        v += c;
        for k in 0..3 {
            g[k] -= u[k] * s;
        }
    }
    let a = ens.amplitude;
    (a * v, [a * g[0], a * g[1], a * g[2]])
}

/// Regular grid of nodes origin + h * (i, j, k). Unused axes have one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub dim: usize,
    pub origin: [f64; 3],
    pub spacing: f64,
    pub extents: [usize; 3],
}

impl GridLayout {
    /// Covers [-half_width, half_width]^dim with spacing at most h.
    pub fn cube(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(RwmError::Validation(format!("dim must be 2 or 3, got {dim}")));
        }
        if !(h > 0.0) || !(half_width > 0.0) {
            return Err(RwmError::Validation("spacing and half width must be positive".into()));
        }
        let cells = (2.0 * half_width / h - 1e-9).ceil().max(1.0) as usize;
        let n = cells + 1;
        Ok(GridLayout {
            dim,
            origin: [-half_width, -half_width, if dim == 3 { -half_width } else { 0.0 }],
            spacing: 2.0 * half_width / cells as f64,
            extents: [n, n, if dim == 3 { n } else { 1 }],
        })
    }

    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.extents[0] * (j + self.extents[1] * k)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + self.spacing * i as f64
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(0, i), self.coord(1, j), self.coord(2, k)]
    }

    /// Smallest and largest coordinate along an axis.
    pub fn span(&self, axis: usize) -> (f64, f64) {
        (self.origin[axis], self.coord(axis, self.extents[axis] - 1))
    }

    /// True when the grid contains the ball (or disc) of radius r at the origin.
    pub fn covers_ball(&self, r: f64) -> bool {
        let slack = 1e-9 * r.max(1.0);
        (0..self.dim).all(|a| {
            let (lo, hi) = self.span(a);
            lo <= -r + slack && hi >= r - slack
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub layout: GridLayout,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub grad_xi: Option<Vec<[f64; 3]>>,
    pub grad_eta: Option<Vec<[f64; 3]>>,
}

/// Per-axis phasors e^{i u_{n,a} x_a}, laid out [node][wave].
fn axis_phasors(ens: &PlaneWaveEnsemble, layout: &GridLayout, axis: usize) -> Vec<Complex64> {
    let n = ens.n_waves();
    let m = layout.extents[axis];
    let mut out = Vec::with_capacity(n * m);
    for i in 0..m {
        let x = layout.coord(axis, i);
        for u in &ens.directions {
            out.push(Complex64::from_polar(1.0, u[axis] * x));
        }
    }
    out
}

fn synthesize(
    ens: &PlaneWaveEnsemble,
    layout: &GridLayout,
    gradients: bool,
) -> (Vec<f64>, Option<Vec<[f64; 3]>>) {
    let n = ens.n_waves();
    let [nx, ny, nz] = layout.extents;
    let px = axis_phasors(ens, layout, 0);
    let py = axis_phasors(ens, layout, 1);
    let pz = axis_phasors(ens, layout, 2);
    let base: Vec<Complex64> = ens.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
    let a = ens.amplitude;
    // One z-slice per task; every node is a sequential sum over waves, so the
    // result does not depend on the thread count.
    let slices: Vec<(Vec<f64>, Vec<[f64; 3]>)> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let mut vals = Vec::with_capacity(nx * ny);
            let mut grads = Vec::with_capacity(if gradients { nx * ny } else { 0 });
            let mut q = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..ny {
                for w in 0..n {
                    q[w] = base[w] * py[j * n + w] * pz[k * n + w];
                }
                for i in 0..nx {
                    let row = &px[i * n..(i + 1) * n];
                    let mut re = 0.0;
                    let mut g = [0.0; 3];
                    for w in 0..n {
                        let p = q[w] * row[w];
                        re += p.re;
                        if gradients {
                            let u = &ens.directions[w];
                            g[0] -= u[0] * p.im;
                            g[1] -= u[1] * p.im;
                            g[2] -= u[2] * p.im;
                        }
                    }
                    vals.push(a * re);
                    if gradients {
                        grads.push([a * g[0], a * g[1], a * g[2]]);
                    }
                }
            }
            (vals, grads)
        })
        .collect();
    let mut vals = Vec::with_capacity(layout.len());
    let mut grads = Vec::with_capacity(if gradients { layout.len() } else { 0 });
    for (v, g) in slices {
        vals.extend(v);
        grads.extend(g);
    }
    (vals, gradients.then_some(grads))
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    layout: GridLayout,
    arrays: Vec<String>,
}

impl FieldGrid {
    /// Samples both ensembles on the layout; gradients are analytic.
    pub fn from_ensembles(
        xi: &PlaneWaveEnsemble,
        eta: &PlaneWaveEnsemble,
        layout: GridLayout,
        gradients: bool,
    ) -> Result<Self> {
        if xi.dim != layout.dim || eta.dim != layout.dim {
            return Err(RwmError::Dimension {
                expected: layout.dim,
                got: xi.dim,
            });
        }
        let (xv, xg) = synthesize(xi, &layout, gradients);
        let (ev, eg) = synthesize(eta, &layout, gradients);
        Ok(FieldGrid {
            layout,
            xi: xv,
            eta: ev,
            grad_xi: xg,
            grad_eta: eg,
        })
    }

    /// Fixture grids from closed-form (xi, eta); no gradients.
    pub fn from_fn<F: Fn([f64; 3]) -> (f64, f64)>(layout: GridLayout, f: F) -> Self {
        let mut xi = Vec::with_capacity(layout.len());
        let mut eta = Vec::with_capacity(layout.len());
        for k in 0..layout.extents[2] {
            for j in 0..layout.extents[1] {
                for i in 0..layout.extents[0] {
                    let (a, b) = f(layout.node(i, j, k));
                    xi.push(a);
                    eta.push(b);
                }
            }
        }
        FieldGrid {
            layout,
            xi,
            eta,
            grad_xi: None,
            grad_eta: None,
        }
    }

    /// Writes little-endian f64 arrays to `path` and a JSON header to
    /// `path` with extension `.json`.
    pub fn write_binary(&self, path: &Path) -> Result<PathBuf> {
        let mut names = vec!["xi".to_string(), "eta".to_string()];
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for v in self.xi.iter().chain(&self.eta) {
            w.write_all(&v.to_le_bytes())?;
        }
        for (name, g) in [("grad_xi", &self.grad_xi), ("grad_eta", &self.grad_eta)] {
            if let Some(g) = g {
                names.push(name.to_string());
                for v in g.iter().flatten() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        let sidecar = path.with_extension("json");
        let header = GridHeader {
            layout: self.layout.clone(),
            arrays: names,
        };
        std::fs::write(&sidecar, serde_json::to_string_pretty(&header)?)?;
        Ok(sidecar)
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let header: GridHeader =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let floats: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let n = header.layout.len();
        let mut pos = 0;
        let mut take = |len: usize| -> Result<Vec<f64>> {
            let s = floats
                .get(pos..pos + len)
                .ok_or_else(|| RwmError::Io("grid dump shorter than its header".into()))?
                .to_vec();
            pos += len;
            Ok(s)
        };
        let mut grid = FieldGrid {
            layout: header.layout.clone(),
            xi: Vec::new(),
            eta: Vec::new(),
            grad_xi: None,
            grad_eta: None,
        };
        for name in &header.arrays {
            match name.as_str() {
                "xi" => grid.xi = take(n)?,
                "eta" => grid.eta = take(n)?,
                "grad_xi" | "grad_eta" => {
                    let g: Vec<[f64; 3]> =
                        take(3 * n)?.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
                    if name == "grad_xi" {
                        grid.grad_xi = Some(g);
                    } else {
                        grid.grad_eta = Some(g);
                    }
                }
                other => return Err(RwmError::Io(format!("unknown array {other}"))),
            }
        }
        Ok(grid)
    }
}

pub const MAX_ORACLE_POINTS: usize = 2000;
const JITTER_LADDER: [f64; 5] = [0.0, 1e-14, 1e-12, 1e-10, 1e-8];

/// Exact joint Gaussian sampler for sinc (3D) or J0 (2D) covariance.
/// Coincident points share one variable.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    factor: DMatrix<f64>,
    map: Vec<usize>,
    pub jitter: f64,
}

fn covariance(dim: usize, d: f64) -> f64 {
    if dim == 3 {
        sinc_kernel(d).r
    } else {
        bessel_j0(d)
    }
}

impl GaussianOracle {
    pub fn new(points: &[[f64; 3]], dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(RwmError::Validation(format!("dim must be 2 or 3, got {dim}")));
        }
        if points.len() > MAX_ORACLE_POINTS {
            return Err(RwmError::Validation(format!(
                "at most {MAX_ORACLE_POINTS} points, got {}",
                points.len()
            )));
        }
        let mut distinct: Vec<[f64; 3]> = Vec::new();
        let mut map = Vec::with_capacity(points.len());
        for p in points {
            match distinct.iter().position(|q| q == p) {
                Some(i) => map.push(i),
                None => {
                    map.push(distinct.len());
                    distinct.push(*p);
                }
            }
        }
        let m = distinct.len();
        let cov = DMatrix::from_fn(m, m, |i, j| {
            let (p, q) = (distinct[i], distinct[j]);
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            covariance(dim, d)
        });
        for jitter in JITTER_LADDER {
            let c = &cov + DMatrix::identity(m, m) * jitter;
            if let Some(ch) = Cholesky::new(c) {
                return Ok(GaussianOracle {
                    factor: ch.l(),
                    map,
                    jitter,
                });
            }
        }
        Err(RwmError::Conditioning {
            jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.factor.nrows();
        let z = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
        let v = &self.factor * z;
        self.map.iter().map(|&i| v[i]).collect()
    }
}

/// One exact joint draw of (xi, eta) at the points.
pub fn exact_gaussian_sample(
    points: &[[f64; 3]],
    dim: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let oracle = GaussianOracle::new(points, dim)?;
    let xi = oracle.sample(&mut stream_rng(seed, 0));
    let eta = oracle.sample(&mut stream_rng(seed, 1));
    Ok((xi, eta))
}

/// Precomputed sum_alpha 2 pi c_alpha H_alpha(Y) over |alpha| = 2q.
#[derive(Debug, Clone)]
pub struct ChaosProjector {
    pub q: u32,
    pub norm: Normalization,
    terms: Vec<([u32; 8], f64)>,
}

impl ChaosProjector {
    pub fn new(q: u32, norm: Normalization) -> Result<Self> {
        if q != 1 && q != 2 {
            return Err(RwmError::Validation(format!("q must be 1 or 2, got {q}")));
        }
        let terms = chaos_multi_indices(2 * q, norm)?
            .into_iter()
            .map(|(a, c)| {
                let mut arr = [0u32; 8];
                arr.copy_from_slice(&a.alpha);
                (arr, rat_to_f64(&c) / (2.0 * PI))
            })
            .collect();
        Ok(ChaosProjector { q, norm, terms })
    }

    /// sum_alpha c_alpha H_alpha(y) at a single Y = (xi, eta, sqrt3 grad xi, sqrt3 grad eta).
    pub fn integrand(&self, y: &[f64; 8]) -> f64 {
        let order = 2 * self.q as usize;
        let mut h = [[0.0; 5]; 8];
        for (p, row) in h.iter_mut().enumerate() {
            hermite_table(y[p], &mut row[..=order]);
        }
        self.terms
            .iter()
            .map(|(a, c)| {
                let mut v = *c;
                for p in 0..8 {
                    if a[p] > 0 {
                        v *= h[p][a[p] as usize];
                    }
                }
                v
            })
            .sum()
    }

    /// Riemann sums of I_{2q}(B_R) for several nested radii on one grid.
    pub fn project(&self, grid: &FieldGrid, radii: &[f64]) -> Result<Vec<f64>> {
        let l = &grid.layout;
        if l.dim != 3 {
            return Err(RwmError::Unsupported("chaos projection is three-dimensional".into()));
        }
        let (gx, ge) = match (&grid.grad_xi, &grid.grad_eta) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(RwmError::Validation("grid carries no gradients".into())),
        };
        let rmax = radii.iter().cloned().fold(0.0, f64::max);
        if !l.covers_ball(rmax) {
            return Err(RwmError::Domain(format!("grid does not cover the ball of radius {rmax}")));
        }
        let s3 = 3f64.sqrt();
        let cell = l.spacing.powi(3);
        let mut sums = vec![0.0; radii.len()];
        for k in 0..l.extents[2] {
            for j in 0..l.extents[1] {
                for i in 0..l.extents[0] {
                    let x = l.node(i, j, k);
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    if r2 > rmax * rmax {
                        continue;
                    }
                    let n = l.index(i, j, k);
                    let (a, b) = (gx[n], ge[n]);
                    let y = [
                        grid.xi[n],
                        grid.eta[n],
                        s3 * a[0],
                        s3 * a[1],
                        s3 * a[2],
                        s3 * b[0],
                        s3 * b[1],
                        s3 * b[2],
                    ];
                    let v = self.integrand(&y) * cell;
                    for (s, r) in sums.iter_mut().zip(radii) {
                        if r2 <= r * r {
                            *s += v;
                        }
                    }
                }
            }
        }
        Ok(sums)
    }
}

/// I_{2q}(B_R) with the exact det_perp coefficients.
pub fn chaos_projection(grid: &FieldGrid, q: u32, r: f64) -> Result<f64> {
    Ok(ChaosProjector::new(q, Normalization::Exact)?.project(grid, &[r])?[0])
}
