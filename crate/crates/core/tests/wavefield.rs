use rand::Rng;
use rwm_core::kernels::{bessel_j0, sinc_kernel};
use rwm_core::nodal::{mc_nodal_statistics, NodalStudy};
use rwm_core::rng::{mix_seed, stream_rng};
use rwm_core::stats::RunningMoments;
use rwm_core::wavefield::*;
use rwm_core::RwmError;
use std::f64::consts::PI;

fn value(e: &PlaneWaveEnsemble, x: [f64; 3]) -> f64 {
    eval_field_and_gradient(e, &x).0
}

/// Mean of xi(a) xi(b) over independent ensembles.
fn lag_moment(dim: usize, a: [f64; 3], b: [f64; 3], reps: u64, seed: u64) -> RunningMoments {
    let mut m = RunningMoments::new();
    for rep in 0..reps {
        let (xi, _) = sample_ensemble(dim, DEFAULT_N_WAVES, mix_seed(seed, rep)).unwrap();
        m.push(value(&xi, a) * value(&xi, b));
    }
    m
}

#[test]
fn single_wave_examples() {
    let e = PlaneWaveEnsemble {
        dim: 3,
        directions: vec![[1.0, 0.0, 0.0]],
        phases: vec![0.0],
        amplitude: 2f64.sqrt(),
        seed: 0,
    };
    let (v, g) = eval_field_and_gradient(&e, &[0.0, 0.0, 0.0]);
    assert!((v - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(g, [0.0, 0.0, 0.0]);
    let (v, g) = eval_field_and_gradient(&e, &[PI / 2.0, 0.0, 0.0]);
    assert!(v.abs() < 1e-15);
    assert!((g[0] + 2f64.sqrt()).abs() < 1e-15 && g[1] == 0.0 && g[2] == 0.0);
}

#[test]
fn ensembles_are_well_formed_and_reproducible() {
    for dim in [2, 3] {
        let (a, b) = sample_ensemble(dim, 300, 17).unwrap();
        let (c, _) = sample_ensemble(dim, 300, 17).unwrap();
        assert_eq!(a, c);
        assert_ne!(a.phases, b.phases);
        assert!((a.amplitude - (2.0f64 / 300.0).sqrt()).abs() < 1e-15);
        for (u, p) in a.directions.iter().zip(&a.phases) {
            let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-12);
            assert!((0.0..2.0 * PI).contains(p));
            if dim == 2 {
                assert_eq!(u[2], 0.0);
            }
        }
    }
    assert!(sample_ensemble(4, 10, 1).is_err());
    assert!(sample_ensemble(3, 0, 1).is_err());
}

#[test]
fn covariance_zeros() {
    let m = lag_moment(3, [0.0; 3], [PI, 0.0, 0.0], 2000, 1);
    assert!(m.mean().abs() < 3.0 * m.stderr_mean(), "sinc(pi): {}", m.mean());
    let z = 2.404_825_557_695_773;
    assert!(bessel_j0::<f64>(z).abs() < 1e-14);
    let m = lag_moment(2, [0.0; 3], [z, 0.0, 0.0], 2000, 2);
    assert!(m.mean().abs() < 3.0 * m.stderr_mean(), "J0 zero: {}", m.mean());
}

#[test]
fn xi_and_eta_are_uncorrelated() {
    let mut m = RunningMoments::new();
    for rep in 0..2000 {
        let (xi, eta) = sample_ensemble(3, DEFAULT_N_WAVES, mix_seed(3, rep)).unwrap();
        m.push(value(&xi, [0.0; 3]) * value(&eta, [0.4, -0.2, 0.1]));
    }
    assert!(m.mean().abs() < 3.0 * m.stderr_mean());
}

#[test]
fn stationarity_three_bases_three_lags() {
    let bases = [[0.0, 0.0, 0.0], [3.0, -1.0, 2.0], [-5.0, 4.0, 0.5]];
    let lags: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 0.0, 2.0], [1.2, 1.6, 0.0]];
    for lag in lags {
        let d = (lag[0] * lag[0] + lag[1] * lag[1] + lag[2] * lag[2]).sqrt();
        let ms: Vec<RunningMoments> = bases
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let c = [b[0] + lag[0], b[1] + lag[1], b[2] + lag[2]];
                lag_moment(3, *b, c, 3000, 100 + i as u64)
            })
            .collect();
        for i in 0..3 {
            assert!((ms[i].mean() - sinc_kernel(d).r).abs() < 3.0 * ms[i].stderr_mean());
            for j in i + 1..3 {
                let se = (ms[i].stderr_mean().powi(2) + ms[j].stderr_mean().powi(2)).sqrt();
                assert!((ms[i].mean() - ms[j].mean()).abs() < 3.0 * se);
            }
        }
    }
}

#[test]
fn gradients_are_analytic() {
    let (xi, eta) = sample_ensemble(3, 64, 5).unwrap();
    let layout = GridLayout::cube(3, 1.0, 0.25).unwrap();
    let g = FieldGrid::from_ensembles(&xi, &eta, layout.clone(), true).unwrap();
    let gx = g.grad_xi.as_ref().unwrap();
    let ge = g.grad_eta.as_ref().unwrap();
    for (idx, (i, j, k)) in [(0, 0, 0), (3, 5, 7), (8, 8, 8)].into_iter().enumerate() {
        let p = layout.node(i, j, k);
        let n = layout.index(i, j, k);
        let (v, dv) = eval_field_and_gradient(&xi, &p);
        let (w, dw) = eval_field_and_gradient(&eta, &p);
        assert!((g.xi[n] - v).abs() < 1e-12 && (g.eta[n] - w).abs() < 1e-12, "node {idx}");
        for a in 0..3 {
            assert!((gx[n][a] - dv[a]).abs() < 1e-12 && (ge[n][a] - dw[a]).abs() < 1e-12);
            let e = 1e-6;
            let (mut hi, mut lo) = (p, p);
            hi[a] += e;
            lo[a] -= e;
            let fd = (value(&xi, hi) - value(&xi, lo)) / (2.0 * e);
            assert!((fd - dv[a]).abs() < 1e-7);
        }
    }
}

fn helmholtz_residual(h: f64) -> f64 {
    let (xi, eta) = sample_ensemble(3, DEFAULT_N_WAVES, 12).unwrap();
    let layout = GridLayout::cube(3, 1.0, h).unwrap();
    let g = FieldGrid::from_ensembles(&xi, &eta, layout.clone(), false).unwrap();
    let [nx, ny, nz] = layout.extents;
    let h = layout.spacing;
    let mut worst: f64 = 0.0;
    for k in 1..nz - 1 {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let c = g.xi[layout.index(i, j, k)];
                let s = g.xi[layout.index(i + 1, j, k)]
                    + g.xi[layout.index(i - 1, j, k)]
                    + g.xi[layout.index(i, j + 1, k)]
                    + g.xi[layout.index(i, j - 1, k)]
                    + g.xi[layout.index(i, j, k + 1)]
                    + g.xi[layout.index(i, j, k - 1)];
                let lap = (s - 6.0 * c) / (h * h);
                worst = worst.max((lap + c).abs());
            }
        }
    }
    worst
}

#[test]
fn discrete_helmholtz_residual_is_second_order() {
    let coarse = helmholtz_residual(0.2);
    let fine = helmholtz_residual(0.1);
    assert!(coarse < 0.02, "{coarse}");
    let ratio = coarse / fine;
    assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
}

#[test]
fn oracle_examples() {
    let pts = [[0.0, 0.0, 0.0], [PI, 0.0, 0.0], [0.0, 0.0, 0.0]];
    let oracle = GaussianOracle::new(&pts, 3).unwrap();
    let mut rng = stream_rng(44, 0);
    let (mut var, mut cross) = (RunningMoments::new(), RunningMoments::new());
    for _ in 0..100_000 {
        let v = oracle.sample(&mut rng);
        assert_eq!(v[0], v[2]);
        var.push(v[0] * v[0]);
        cross.push(v[0] * v[1]);
    }
    assert!((var.mean() - 1.0).abs() < 3.0 * var.stderr_mean());
    assert!(cross.mean().abs() < 3.0 * cross.stderr_mean());
    let (a, b) = exact_gaussian_sample(&pts, 3, 9).unwrap();
    assert_eq!(a.len(), 3);
    assert_ne!(a, b);
    let too_many = vec![[0.0; 3]; MAX_ORACLE_POINTS + 1];
    assert!(matches!(GaussianOracle::new(&too_many, 3), Err(RwmError::Validation(_))));
}

#[test]
fn plane_waves_match_the_exact_oracle_on_50_points() {
    let mut rng = stream_rng(2718, 0);
    let pts: Vec<[f64; 3]> = (0..50)
        .map(|_| [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)])
        .collect();
    let n = pts.len();
    let reps = 10_000u64;
    let mut pw = vec![RunningMoments::new(); n * n];
    let mut ex = vec![RunningMoments::new(); n * n];
    let oracle = GaussianOracle::new(&pts, 3).unwrap();
    let mut orng = stream_rng(31, 0);
    for rep in 0..reps {
        let (xi, _) = sample_ensemble(3, DEFAULT_N_WAVES, mix_seed(77, rep)).unwrap();
        let a: Vec<f64> = pts.iter().map(|p| value(&xi, *p)).collect();
        let b = oracle.sample(&mut orng);
        for i in 0..n {
            for j in i..n {
                pw[i * n + j].push(a[i] * a[j]);
                ex[i * n + j].push(b[i] * b[j]);
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let (p, e) = (&pw[i * n + j], &ex[i * n + j]);
            let se = (p.stderr_mean().powi(2) + e.stderr_mean().powi(2)).sqrt();
            let diff = (p.mean() - e.mean()).abs();
            worst = worst.max(diff / (3.0 * se).max(0.02));
            assert!(diff <= (3.0 * se).max(0.02), "({i},{j}): {} vs {}", p.mean(), e.mean());
        }
    }
    println!("worst entry uses {:.2} of its allowance", worst);
}

#[test]
fn fields_are_bitwise_identical_across_thread_counts() {
    let build = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let (xi, eta) = sample_ensemble(3, 128, 4).unwrap();
                let layout = GridLayout::cube(3, 3.0, DEFAULT_SPACING).unwrap();
                let g = FieldGrid::from_ensembles(&xi, &eta, layout, true).unwrap();
                let study = NodalStudy {
                    dim: 3,
                    radii: vec![2.0, 3.0],
                    n_waves: 64,
                    grid_spacing: DEFAULT_SPACING,
                    replicates: 6,
                    seed: 8,
                };
                (g, mc_nodal_statistics(&study).unwrap())
            })
    };
    let (g1, s1) = build(1);
    let (g4, s4) = build(4);
    assert_eq!(g1, g4);
    assert_eq!(s1, s4);
}

#[test]
fn binary_dump_round_trip() {
    let (xi, eta) = sample_ensemble(3, 32, 6).unwrap();
    let layout = GridLayout::cube(3, 1.5, 0.3).unwrap();
    let g = FieldGrid::from_ensembles(&xi, &eta, layout, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.bin");
    let sidecar = g.write_binary(&path).unwrap();
    assert!(sidecar.exists());
    let back = FieldGrid::read_binary(&path).unwrap();
    assert_eq!(g, back);
    let bytes = std::fs::metadata(&path).unwrap().len() as usize;
    assert_eq!(bytes, g.layout.len() * 8 * 8);
}

#[test]
fn chaos_projections_are_centred() {
    let layout = GridLayout::cube(3, 2.0, DEFAULT_SPACING).unwrap();
    let mut m2 = RunningMoments::new();
    let mut m4 = RunningMoments::new();
    for rep in 0..400 {
        let (xi, eta) = sample_ensemble(3, DEFAULT_N_WAVES, mix_seed(61, rep)).unwrap();
        let g = FieldGrid::from_ensembles(&xi, &eta, layout.clone(), true).unwrap();
        m2.push(chaos_projection(&g, 1, 2.0).unwrap());
        m4.push(chaos_projection(&g, 2, 2.0).unwrap());
    }
    assert!(m2.mean().abs() < 3.0 * m2.stderr_mean(), "I2 mean {}", m2.mean());
    assert!(m4.mean().abs() < 3.0 * m4.stderr_mean(), "I4 mean {}", m4.mean());
}

#[test]
fn chaos_projection_errors() {
    let (xi, eta) = sample_ensemble(3, 16, 2).unwrap();
    let layout = GridLayout::cube(3, 2.0, DEFAULT_SPACING).unwrap();
    let g = FieldGrid::from_ensembles(&xi, &eta, layout.clone(), true).unwrap();
    assert!(matches!(chaos_projection(&g, 2, 3.0), Err(RwmError::Domain(_))));
    assert!(chaos_projection(&g, 3, 1.0).is_err());
    let bare = FieldGrid::from_ensembles(&xi, &eta, layout, false).unwrap();
    assert!(matches!(chaos_projection(&bare, 1, 1.0), Err(RwmError::Validation(_))));
}
