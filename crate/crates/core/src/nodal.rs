//! Nodal set extraction: {xi = eta = 0} in R^3 through linear models on a
//! Kuhn tetrahedral split, and {xi = 0} in R^2 by marching squares.

use crate::error::{Result, RwmError};
use crate::rng::mix_seed;
use crate::stats::RunningMoments;
use crate::wavefield::{sample_ensemble, FieldGrid, GridLayout};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufWriter, Write};
use std::path::Path;

pub type Point = [f64; 3];

/// Largest spacing accepted by the extractors: a sixth of the wavelength.
pub const MAX_SPACING: f64 = 2.0 * PI / 6.0;
const DEGENERACY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodalCurve {
    pub segments: Vec<(Point, Point)>,
    pub total_length: f64,
    /// Tetrahedra (3D) or cells (2D) skipped as degenerate.
    pub degenerate: usize,
    /// Tetrahedra (3D) or cells (2D) visited.
    pub examined: usize,
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn lerp(a: &Point, b: &Point, t: f64) -> Point {
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

/// Part of segment pq inside the closed ball of radius r.
pub fn clip_to_ball(p: &Point, q: &Point, r: f64) -> Option<(Point, Point)> {
    let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let a = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let c = p[0] * p[0] + p[1] * p[1] + p[2] * p[2] - r * r;
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * (p[0] * d[0] + p[1] * d[1] + p[2] * d[2]);
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = ((-b - s) / (2.0 * a)).max(0.0);
    let t1 = ((-b + s) / (2.0 * a)).min(1.0);
    if t0 >= t1 {
        return None;
    }
    Some((lerp(p, q, t0), lerp(p, q, t1)))
}

/// Part of segment pq inside the square [-r, r]^2 (Liang-Barsky).
pub fn clip_to_square(p: &Point, q: &Point, r: f64) -> Option<(Point, Point)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for axis in 0..2 {
        let d = q[axis] - p[axis];
        for (num, den) in [(p[axis] + r, -d), (r - p[axis], d)] {
            if den == 0.0 {
                if num < 0.0 {
                    return None;
                }
            } else {
                let t = num / den;
                if den < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
    }
    (t0 < t1).then(|| (lerp(p, q, t0), lerp(p, q, t1)))
}

impl NodalCurve {
    fn from_segments(segments: Vec<(Point, Point)>, degenerate: usize, examined: usize) -> Self {
        let total_length = segments.iter().map(|(a, b)| dist(a, b)).sum();
        NodalCurve {
            segments,
            total_length,
            degenerate,
            examined,
        }
    }

    /// Length of the part inside the ball of radius r.
    pub fn length_within_ball(&self, r: f64) -> f64 {
        self.segments
            .iter()
            .filter_map(|(a, b)| clip_to_ball(a, b, r))
            .map(|(a, b)| dist(&a, &b))
            .sum()
    }

    /// Length of the part inside the square [-r, r]^2.
    pub fn length_within_square(&self, r: f64) -> f64 {
        self.segments
            .iter()
            .filter_map(|(a, b)| clip_to_square(a, b, r))
            .map(|(a, b)| dist(&a, &b))
            .sum()
    }

    pub fn recomputed_length(&self) -> f64 {
        self.segments.iter().map(|(a, b)| dist(a, b)).sum()
    }

    /// Plain-text line list: "v x y z" records then "l i j" (1-based).
    pub fn write_obj(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for (a, b) in &self.segments {
            writeln!(w, "v {} {} {}", a[0], a[1], a[2])?;
            writeln!(w, "v {} {} {}", b[0], b[1], b[2])?;
        }
        for i in 0..self.segments.len() {
            writeln!(w, "l {} {}", 2 * i + 1, 2 * i + 2)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_spacing(h: f64) -> Result<()> {
    if h > MAX_SPACING * (1.0 + 1e-12) {
        return Err(RwmError::Validation(format!(
            "grid spacing {h} exceeds a sixth of the wavelength"
        )));
    }
    Ok(())
}

// Kuhn split: the path v0 -> v0+e_a -> v0+e_a+e_b -> v7 for each axis order.
const KUHN: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn sign(v: f64) -> bool {
    v >= 0.0
}

enum TetOutcome {
    Empty,
    Degenerate,
    Segment(Point, Point),
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn tet_segment(p: &[Point; 4], f: &[f64; 4], g: &[f64; 4], axes: &[usize; 3], h: f64) -> TetOutcome {
    let f_active = f.iter().any(|&v| sign(v) != sign(f[0])) || f.iter().all(|v| v.abs() <= DEGENERACY_EPS);
    let g_active = g.iter().any(|&v| sign(v) != sign(g[0])) || g.iter().all(|v| v.abs() <= DEGENERACY_EPS);
    if !(f_active && g_active) {
        return TetOutcome::Empty;
    }
    if f.iter().all(|v| v.abs() <= DEGENERACY_EPS) || g.iter().all(|v| v.abs() <= DEGENERACY_EPS) {
        return TetOutcome::Degenerate;
    }
    let mut gf = [0.0; 3];
    let mut gg = [0.0; 3];
    for s in 0..3 {
        gf[axes[s]] = (f[s + 1] - f[s]) / h;
        gg[axes[s]] = (g[s + 1] - g[s]) / h;
    }
    if norm(&cross(&gf, &gg)) <= DEGENERACY_EPS * norm(&gf) * norm(&gg) {
        return TetOutcome::Degenerate;
    }

    // Polygon {f_L = 0}: crossing points with the interpolated g.
    let pos: Vec<usize> = (0..4).filter(|&i| sign(f[i])).collect();
    let neg: Vec<usize> = (0..4).filter(|&i| !sign(f[i])).collect();
    let cut = |a: usize, b: usize| -> (Point, f64) {
        let t = f[a] / (f[a] - f[b]);
        (lerp(&p[a], &p[b], t), g[a] + t * (g[b] - g[a]))
    };
    let poly: Vec<(Point, f64)> = match (pos.len(), neg.len()) {
        (1, 3) => neg.iter().map(|&b| cut(pos[0], b)).collect(),
        (3, 1) => pos.iter().map(|&a| cut(a, neg[0])).collect(),
        (2, 2) => {
            let (a, b, c, d) = (pos[0], pos[1], neg[0], neg[1]);
            vec![cut(a, c), cut(b, c), cut(b, d), cut(a, d)]
        }
        _ => return TetOutcome::Empty,
    };

    // g_L is linear on the convex polygon: zero or two sign changes.
    let mut ends = Vec::with_capacity(2);
    for i in 0..poly.len() {
        let (pa, ga) = &poly[i];
        let (pb, gb) = &poly[(i + 1) % poly.len()];
        if sign(*ga) != sign(*gb) {
            ends.push(lerp(pa, pb, ga / (ga - gb)));
        }
    }
    if ends.len() == 2 {
        TetOutcome::Segment(ends[0], ends[1])
    } else {
        TetOutcome::Empty
    }
}

/// Nodal curve of (xi, eta) inside B_R.
pub fn extract_nodal_curve_3d(grid: &FieldGrid, r: f64) -> Result<NodalCurve> {
    let l = &grid.layout;
    if l.dim != 3 {
        return Err(RwmError::Dimension {
            expected: 3,
            got: l.dim,
        });
    }
    check_spacing(l.spacing)?;
    if !l.covers_ball(r) {
        return Err(RwmError::Domain(format!("grid does not cover the ball of radius {r}")));
    }
    let h = l.spacing;
    let [nx, ny, nz] = l.extents;
    let half_diag = 3f64.sqrt() * h / 2.0;
    let slices: Vec<(Vec<(Point, Point)>, usize, usize)> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut segs = Vec::new();
            let (mut degenerate, mut examined) = (0, 0);
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let v0 = l.node(i, j, k);
                    let c = [v0[0] + h / 2.0, v0[1] + h / 2.0, v0[2] + h / 2.0];
                    if norm(&c) - half_diag > r {
                        continue;
                    }
                    for axes in &KUHN {
                        let mut idx = [i, j, k];
                        let mut pts = [[0.0; 3]; 4];
                        let mut f = [0.0; 4];
                        let mut g = [0.0; 4];
                        for s in 0..4 {
                            if s > 0 {
                                idx[axes[s - 1]] += 1;
                            }
                            let n = l.index(idx[0], idx[1], idx[2]);
                            pts[s] = l.node(idx[0], idx[1], idx[2]);
                            f[s] = grid.xi[n];
                            g[s] = grid.eta[n];
                        }
                        examined += 1;
                        match tet_segment(&pts, &f, &g, axes, h) {
                            TetOutcome::Empty => {}
                            TetOutcome::Degenerate => degenerate += 1,
                            TetOutcome::Segment(a, b) => {
                                if let Some(s) = clip_to_ball(&a, &b, r) {
                                    segs.push(s);
                                }
                            }
                        }
                    }
                }
            }
            (segs, degenerate, examined)
        })
        .collect();
    let mut segments = Vec::new();
    let (mut degenerate, mut examined) = (0, 0);
    for (s, d, e) in slices {
        segments.extend(s);
        degenerate += d;
        examined += e;
    }
    Ok(NodalCurve::from_segments(segments, degenerate, examined))
}

/// Zero lines of the xi array over the whole (square) grid. Saddle cells
/// are resolved by `center`, defaulting to the mean of the four corners.
pub fn extract_nodal_lines_2d_with(
    grid: &FieldGrid,
    center: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>,
) -> Result<NodalCurve> {
    let l = &grid.layout;
    if l.dim != 2 {
        return Err(RwmError::Dimension {
            expected: 2,
            got: l.dim,
        });
    }
    check_spacing(l.spacing)?;
    let h = l.spacing;
    let [nx, ny, _] = l.extents;
    let rows: Vec<(Vec<(Point, Point)>, usize, usize)> = (0..ny - 1)
        .into_par_iter()
        .map(|j| {
            let mut segs = Vec::new();
            let mut degenerate = 0;
            for i in 0..nx - 1 {
                // Corners counterclockwise from (i, j).
                let ids = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let p: Vec<Point> = ids.iter().map(|&(a, b)| l.node(a, b, 0)).collect();
                let v: Vec<f64> = ids.iter().map(|&(a, b)| grid.xi[l.index(a, b, 0)]).collect();
                if v.iter().all(|x| x.abs() <= DEGENERACY_EPS) {
                    degenerate += 1;
                    continue;
                }
                let s: Vec<bool> = v.iter().map(|&x| sign(x)).collect();
                let edge = |e: usize| -> Option<Point> {
                    let (a, b) = (e, (e + 1) % 4);
                    (s[a] != s[b]).then(|| lerp(&p[a], &p[b], v[a] / (v[a] - v[b])))
                };
                let crossings: Vec<(usize, Point)> =
                    (0..4).filter_map(|e| edge(e).map(|q| (e, q))).collect();
                match crossings.len() {
                    2 => segs.push((crossings[0].1, crossings[1].1)),
                    4 => {
                        let cv = match center {
                            Some(fc) => fc(p[0][0] + h / 2.0, p[0][1] + h / 2.0),
                            None => v.iter().sum::<f64>() / 4.0,
                        };
                        let e: Vec<Point> = crossings.iter().map(|c| c.1).collect();
                        // Edge e joins corner e and e+1.
                        if sign(cv) == s[0] {
                            // Corners 0 and 2 connect through the center.
                            segs.push((e[0], e[1]));
                            segs.push((e[2], e[3]));
                        } else {
                            segs.push((e[3], e[0]));
                            segs.push((e[1], e[2]));
                        }
                    }
                    _ => {}
                }
            }
            (segs, degenerate, nx - 1)
        })
        .collect();
    let mut segments = Vec::new();
    let (mut degenerate, mut examined) = (0, 0);
    for (s, d, e) in rows {
        segments.extend(s);
        degenerate += d;
        examined += e;
    }
    Ok(NodalCurve::from_segments(segments, degenerate, examined))
}

pub fn extract_nodal_lines_2d(grid: &FieldGrid) -> Result<NodalCurve> {
    extract_nodal_lines_2d_with(grid, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalStatistics {
    pub dim: usize,
    #[serde(rename = "R")]
    pub r: f64,
    /// Volume of B_R (3D) or area of [-R, R]^2 (2D).
    pub volume: f64,
    pub n_replicates: u64,
    pub mean_length: f64,
    pub variance: f64,
    pub stderr_mean: f64,
    pub stderr_variance: f64,
    pub degenerate: usize,
    pub examined: usize,
}

impl NodalStatistics {
    pub fn mean_per_volume(&self) -> f64 {
        self.mean_length / self.volume
    }

    pub fn variance_per_volume(&self) -> f64 {
        self.variance / self.volume
    }

    /// Var / E^2 and a first-order standard error for its logarithm.
    pub fn log_concentration(&self) -> (f64, f64) {
        let ratio = self.variance / (self.mean_length * self.mean_length);
        let se = ((self.stderr_variance / self.variance).powi(2)
            + (2.0 * self.stderr_mean / self.mean_length).powi(2))
        .sqrt();
        (ratio.ln(), se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalStudy {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub n_waves: usize,
    pub grid_spacing: f64,
    pub replicates: u64,
    pub seed: u64,
}

/// Region measure for the study's domain shape.
pub fn region_volume(dim: usize, r: f64) -> f64 {
    if dim == 3 {
        4.0 * PI / 3.0 * r.powi(3)
    } else {
        4.0 * r * r
    }
}

/// Nodal lengths of one replicate for every radius (nested domains).
pub fn replicate_lengths(study: &NodalStudy, replicate: u64) -> Result<(Vec<f64>, usize, usize)> {
    let rmax = study.radii.iter().cloned().fold(0.0, f64::max);
    let (xi, eta) = sample_ensemble(study.dim, study.n_waves, mix_seed(study.seed, replicate))?;
    let layout = GridLayout::cube(study.dim, rmax, study.grid_spacing)?;
    let grid = FieldGrid::from_ensembles(&xi, &eta, layout, false)?;
    let curve = if study.dim == 3 {
        extract_nodal_curve_3d(&grid, rmax)?
    } else {
        extract_nodal_lines_2d(&grid)?
    };
    let lengths = study
        .radii
        .iter()
        .map(|&r| {
            if study.dim == 3 {
                curve.length_within_ball(r)
            } else {
                curve.length_within_square(r)
            }
        })
        .collect();
    Ok((lengths, curve.degenerate, curve.examined))
}

/// Replicate loop with streaming moments, one entry per radius.
pub fn mc_nodal_statistics(study: &NodalStudy) -> Result<Vec<NodalStatistics>> {
    if study.replicates < 2 {
        return Err(RwmError::Config("at least two replicates are needed".into()));
    }
    if study.radii.is_empty() || study.radii.iter().any(|&r| !(r > 0.0)) {
        return Err(RwmError::Config("radii must be positive".into()));
    }
    check_spacing(study.grid_spacing)?;
    let per_rep: Vec<(Vec<f64>, usize, usize)> = (0..study.replicates)
        .into_par_iter()
        .map(|rep| replicate_lengths(study, rep))
        .collect::<Result<_>>()?;
    let mut moments = vec![RunningMoments::new(); study.radii.len()];
    let (mut degenerate, mut examined) = (0, 0);
    for (lengths, d, e) in &per_rep {
        for (m, &x) in moments.iter_mut().zip(lengths) {
            m.push(x);
        }
        degenerate += d;
        examined += e;
    }
    Ok(study
        .radii
        .iter()
        .zip(&moments)
        .map(|(&r, m)| NodalStatistics {
            dim: study.dim,
            r,
            volume: region_volume(study.dim, r),
            n_replicates: m.count(),
            mean_length: m.mean(),
            variance: m.variance(),
            stderr_mean: m.stderr_mean(),
            stderr_variance: m.stderr_variance(),
            degenerate,
            examined,
        })
        .collect())
}
