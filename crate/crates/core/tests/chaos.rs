use rand::Rng;
use rand_distr::StandardNormal;
use rwm_core::chaos::*;
use rwm_core::kernels::{hermite, multi_hermite, HermiteIndex};
use rwm_core::rng::stream_rng;
use rwm_core::scalar::{rat, rat_to_f64};
use rwm_core::stats::RunningMoments;
use rwm_core::RwmError;

fn idx(a: [u32; 6]) -> HermiteIndex {
    HermiteIndex::new(a.to_vec())
}

#[test]
fn monte_carlo_agrees_with_exact_coefficients() {
    let cases = [
        [0, 0, 0, 0, 0, 0],
        [2, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 2],
        [4, 0, 0, 0, 0, 0],
        [2, 2, 0, 0, 0, 0],
        [2, 0, 0, 2, 0, 0],
        [0, 2, 0, 2, 0, 0],
        [1, 1, 0, 1, 1, 0],
        [1, 0, 0, 1, 0, 0],
        [3, 0, 0, 1, 0, 0],
    ];
    for (i, a) in cases.iter().enumerate() {
        let alpha = idx(*a);
        let exact = rat_to_f64(&a_coefficient_exact(&alpha).unwrap());
        let est = mc_a_coefficient(&alpha, 2_000_000, 100 + i as u64).unwrap();
        assert!(
            (est.value - exact).abs() < 3.0 * est.stderr,
            "{a:?}: mc {} +- {} vs exact {exact}",
            est.value,
            est.stderr
        );
    }
}

#[test]
fn published_closed_forms_are_reported_as_published() {
    assert_eq!(a_coefficient(&idx([0; 6])).unwrap(), rat(1, 1));
    assert_eq!(a_coefficient(&idx([0, 2, 0, 0, 0, 0])).unwrap(), rat(1, 3));
    assert_eq!(a_coefficient(&idx([0, 0, 2, 0, 0, 2])).unwrap(), rat(1, 9));
    assert_eq!(a_coefficient(&idx([0, 0, 0, 0, 4, 0])).unwrap(), rat(-5, 9));
    assert!(matches!(
        a_coefficient(&idx([1, 1, 0, 1, 1, 0])),
        Err(RwmError::Unsupported(_))
    ));
    assert_eq!(
        a_coefficient_with(&idx([2, 0, 0, 0, 0, 0]), Normalization::AsPublished).unwrap(),
        a_coefficient_with(&idx([2, 0, 0, 0, 0, 0]), Normalization::Exact).unwrap()
    );
}

#[test]
fn det_perp_has_mean_two() {
    // |z1 x z2| for independent standard normals: E|z1| E|z2| E|sin| = (8/pi)(pi/4)
    let mut rng = stream_rng(5, 0);
    let mut m = RunningMoments::new();
    for _ in 0..1_000_000 {
        let z: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        m.push(det_perp(&GradientPair::from_slice(&z)));
    }
    assert!((m.mean() - 2.0).abs() < 3.0 * m.stderr_mean(), "{}", m.mean());
}

#[test]
fn multivariate_hermite_orthogonality_by_sampling() {
    let pairs = [
        (vec![2, 0, 1], vec![2, 0, 1]),
        (vec![2, 0, 1], vec![0, 2, 1]),
        (vec![1, 1, 1], vec![1, 1, 1]),
        (vec![3, 0, 0], vec![1, 0, 0]),
        (vec![2, 2, 0], vec![2, 2, 0]),
    ];
    let mut rng = stream_rng(6, 0);
    let samples: Vec<[f64; 3]> = (0..1_000_000)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    for (a, b) in pairs {
        let ha = HermiteIndex::new(a.clone());
        let hb = HermiteIndex::new(b.clone());
        let want = if a == b { ha.factorial() as f64 } else { 0.0 };
        let mut m = RunningMoments::new();
        for y in &samples {
            m.push(multi_hermite(&ha, y).unwrap() * multi_hermite(&hb, y).unwrap());
        }
        assert!((m.mean() - want).abs() < 3.0 * m.stderr_mean(), "{a:?} {b:?}: {}", m.mean());
    }
}

#[test]
fn fourth_moment_formulas_by_sampling() {
    // X2, X3 are built from X0, X1 with orthogonal loadings so both pairs
    // (0,1) and (2,3) are uncorrelated, as the closed forms require.
    let (a, b, c, d) = (0.5, 0.3, -0.3, 0.5);
    let s = (1.0f64 - a * a - b * b).sqrt();
    let t = (1.0f64 - c * c - d * d).sqrt();
    let corr = vec![
        vec![1.0, 0.0, a, c],
        vec![0.0, 1.0, b, d],
        vec![a, b, 1.0, 0.0],
        vec![c, d, 0.0, 1.0],
    ];
    let want2222 = hermite_product_moment(&[2, 2, 2, 2], &corr).unwrap();
    let want1111 = hermite_product_moment(&[1, 1, 1, 1], &corr).unwrap();
    let corr3 = vec![vec![1.0, 0.0, a], vec![0.0, 1.0, b], vec![a, b, 1.0]];
    let want224 = hermite_product_moment(&[2, 2, 4], &corr3).unwrap();

    let mut rng = stream_rng(7, 0);
    let (mut m2222, mut m1111, mut m224) =
        (RunningMoments::new(), RunningMoments::new(), RunningMoments::new());
    for _ in 0..2_000_000 {
        let z: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let x2 = a * z[0] + b * z[1] + s * z[2];
        let x3 = c * z[0] + d * z[1] + t * z[3];
        let h2 = |v: f64| hermite::<f64>(2, v);
        m2222.push(h2(z[0]) * h2(z[1]) * h2(x2) * h2(x3));
        m1111.push(z[0] * z[1] * x2 * x3);
        m224.push(h2(z[0]) * h2(z[1]) * hermite::<f64>(4, x2));
    }
    for (name, m, want) in [
        ("2222", &m2222, want2222),
        ("1111", &m1111, want1111),
        ("224", &m224, want224),
    ] {
        assert!(
            (m.mean() - want).abs() < 3.0 * m.stderr_mean(),
            "{name}: {} +- {} vs {want}",
            m.mean(),
            m.stderr_mean()
        );
    }
    assert!(matches!(
        hermite_product_moment(&[2, 2, 2, 2], &vec![vec![1.0, 0.5, 0.0, 0.0], vec![0.5, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]),
        Err(RwmError::Unsupported(_))
    ));
}

#[test]
fn c_coefficients_combine_delta_and_a() {
    // c_alpha = b_{alpha_1} b_{alpha_2} a_{rest}, zero whenever a value index is odd
    let pi = std::f64::consts::PI;
    let c0 = c_coefficient_with(&HermiteIndex::zeros(8), Normalization::Exact).unwrap();
    assert!((c0 - 2.0 / (2.0 * pi)).abs() < 1e-15);
    let odd = HermiteIndex::new(vec![1, 1, 0, 0, 0, 0, 0, 0]);
    assert_eq!(c_coefficient_with(&odd, Normalization::Exact).unwrap(), 0.0);
    // the expected length density is c_0 / 3 = 1/(3 pi)
    assert!((c0 / 3.0 - 1.0 / (3.0 * pi)).abs() < 1e-15);
    for q in [0u32, 2, 4] {
        for (alpha, _) in chaos_multi_indices(q, Normalization::Exact).unwrap() {
            assert_eq!(alpha.order(), q);
        }
    }
}
