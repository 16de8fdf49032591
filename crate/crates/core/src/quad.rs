//! Adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{bail, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 5000;
const INITIAL_PIECES: usize = 8;

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// ∫_a^b f, refined until the error estimate is below `max(atol, rtol·|I|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rtol: f64, atol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    // A few initial pieces keep narrow features from slipping between nodes.
    let mut heap = BinaryHeap::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    for k in 0..INITIAL_PIECES {
        let lo = a + (b - a) * k as f64 / INITIAL_PIECES as f64;
        let hi = if k + 1 == INITIAL_PIECES { b } else { a + (b - a) * (k + 1) as f64 / INITIAL_PIECES as f64 };
        let (value, err) = gk15(&f, lo, hi);
        total += value;
        total_err += err;
        heap.push(Piece { a: lo, b: hi, value, err });
    }
    while total_err > atol.max(rtol * total.abs()) {
        if !total.is_finite() {
            bail!(Numeric, "integrand is not integrable on [{a}, {b}] (non-finite partial sum)");
        }
        if heap.len() >= MAX_INTERVALS {
            bail!(
                Numeric,
                "quadrature on [{a}, {b}] did not converge: estimate {total}, error {total_err:e}"
            );
        }
        let p = heap.pop().expect("heap is nonempty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, err: e2 });
    }
    // Re-sum to shed accumulated cancellation in the running total.
    let sum: f64 = heap.iter().map(|p| p.value).sum();
    if !sum.is_finite() {
        bail!(Numeric, "integrand is not integrable on [{a}, {b}]");
    }
    Ok(sum)
}

/// ∫_a^∞ f via the substitution x = a + t/(1 − t).
pub fn integrate_to_inf(f: impl Fn(f64) -> f64, a: f64, rtol: f64, atol: f64) -> Result<f64> {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
        rtol,
        atol,
    )
}
