//! Fixed quadrature rules.

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = z;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

const XGK21: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_460,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_958_109_831,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, ..., 9).
const WG10: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// 21-point Kronrod estimate and |K - G| on [a, b].
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK21[10] * fc;
    let mut g = 0.0;
    for i in 0..10 {
        let dx = h * XGK21[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK21[i] * s;
        if i % 2 == 1 {
            g += WG10[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive GK21 over the given initial breakpoints. Returns
/// (value, error estimate, intervals used, converged).
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    tol: f64,
    max_intervals: usize,
) -> (f64, f64, usize, bool) {
    let mut ivs: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .map(|w| {
            let (v, e) = gk21(f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let err: f64 = ivs.iter().map(|iv| iv.3).sum();
        if err <= tol || ivs.len() >= max_intervals {
            // Sum in interval order for determinism.
            ivs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
            let val: f64 = ivs.iter().map(|iv| iv.2).sum();
            return (val, err, ivs.len(), err <= tol);
        }
        let (worst, _) = ivs
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.partial_cmp(&q.1 .3).unwrap())
            .unwrap();
        let (a, b, _, _) = ivs.swap_remove(worst);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk21(f, a, m);
        let (v2, e2) = gk21(f, m, b);
        ivs.push((a, m, v1, e1));
        ivs.push((m, b, v2, e2));
    }
}
