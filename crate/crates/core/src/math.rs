//! Small numeric helpers shared across modules.

use alloc::vec::Vec;

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `C(m, 2)` as a float.
#[inline]
pub fn pairs(m: usize) -> f64 {
    let m = m as f64;
    0.5 * m * (m - 1.0)
}

/// Table of `ln k!` for `k = 0..=n`, built by summation so that every entry is
/// consistent with its neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=n {
            acc += ln(k as f64);
            table.push(acc);
        }
        LnFactorials(table)
    }

    pub fn max_n(&self) -> usize {
        self.0.len() - 1
    }

    #[inline]
    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// `ln C(n, k)`; `-inf` when `k > n`.
    #[inline]
    pub fn ln_binomial(&self, n: usize, k: usize) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        self.0[n] - self.0[k] - self.0[n - k]
    }
}

/// Binomial coefficients `C(n, k)` for `k = 0..=n` as floats, built with the
/// multiplicative recurrence. Overflows to `inf` past `n ≈ 1029`.
pub fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = 1.0f64;
    row.push(c);
    for k in 1..=n {
        c = c * (n + 1 - k) as f64 / k as f64;
        // exact integers below 2^53: snap away the division round-off
        if c < 9.0e15 {
            c = libm::round(c);
        }
        row.push(c);
    }
    row
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for (j, &x) in GK_NODES[..7].iter().enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += GK_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += GAUSS_WEIGHTS[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate drops below `rel_tol · |I|` (or an absolute floor of `1e-300`).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 4000;
    if b <= a {
        return 0.0;
    }
    let (value, err) = gauss_kronrod_15(&f, a, b);
    let mut intervals: Vec<(f64, f64, f64, f64)> = alloc::vec![(a, b, value, err)];
    let mut total = value;
    let mut total_err = err;
    while total_err > (rel_tol * total.abs()).max(1e-300) && intervals.len() < MAX_INTERVALS {
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, v, e) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval can no longer be split in floating point
            intervals.push((lo, hi, v, 0.0));
            total_err -= e;
            continue;
        }
        let (v1, e1) = gauss_kronrod_15(&f, lo, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        total_err = intervals.iter().map(|x| x.3).sum();
        total = intervals.iter().map(|x| x.2).sum();
    }
    // final summation in interval order for reproducibility
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    intervals.iter().map(|x| x.2).sum()
}
