//! Adaptive Gauss–Kronrod quadrature and fixed Gauss–Legendre rules.
//!
//! The adaptive driver follows the QUADPACK `qag` strategy: the interval with
//! the largest error estimate is bisected until the summed error estimate
//! drops below the requested tolerance. Semi-infinite ranges are mapped onto
//! `(0, 1]` with `x = a + (1 - u) / u`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Requested accuracy for the adaptive driver. Convergence is declared when
/// the error estimate is below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_subdivisions: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_subdivisions: 2000,
        }
    }

    pub const fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-10, 1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One 21-point Kronrod panel on `[a, b]`; returns (integral, error estimate).
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[10];
    let mut res_abs = res_k.abs();
    let mut res_g = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let y1 = f(center - x);
        let y2 = f(center + x);
        fv1[j] = y1;
        fv2[j] = y2;
        res_k += WGK[j] * (y1 + y2);
        res_abs += WGK[j] * (y1.abs() + y2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (y1 + y2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let err = rescale_error((res_k - res_g) * half, res_abs * scale, res_asc * scale);
    (res_k * half, err)
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration over `[points[0], points[last]]`, with the interior
/// points used as initial panel boundaries (peaks, kinks, singularities).
pub fn integrate_breaks<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], tol: Tolerance) -> Result<QuadResult> {
    if points.len() < 2 {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk21(&mut f, w[0], w[1]);
            evaluations += 21;
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    // Panels too narrow to split further are parked here.
    let mut finished: Vec<Panel> = Vec::new();
    let mut subdivisions = 0;
    loop {
        let total: f64 = heap.iter().chain(&finished).map(|p| p.value).sum();
        let err: f64 = heap.iter().chain(&finished).map(|p| p.error).sum();
        let target = tol.target(total);
        if err <= target || heap.is_empty() {
            if err <= target || err <= 1e3 * f64::EPSILON * total.abs() {
                return Ok(QuadResult {
                    value: total,
                    abs_error: err,
                    evaluations,
                });
            }
            return Err(Error::Quadrature {
                estimate: total,
                error: err,
                tolerance: target,
            });
        }
        if subdivisions >= tol.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: total,
                error: err,
                tolerance: target,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e-14 * worst.a.abs().max(1e-300) {
            finished.push(worst);
            continue;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        subdivisions += 1;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    integrate_breaks(f, &[a, b], tol)
}

/// Integral over `[a, ∞)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Result<QuadResult> {
    integrate(
        |u: f64| {
            let x = a + (1.0 - u) / u;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v / (u * u)
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule over consecutive panels given by `breaks`.
pub fn composite_rule(breaks: &[f64], order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let mut out = Vec::with_capacity(order * breaks.len().saturating_sub(1));
    for p in breaks.windows(2) {
        let (c, h) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        out.extend(x.iter().zip(&w).map(|(xi, wi)| (c + h * xi, h * wi)));
    }
    out
}
