#![allow(dead_code)]

use jsfs_core::{Segment, SizeHistory};
use proptest::prelude::*;

/// One segment of a random history: constant or exponential.
pub fn segment(duration: impl Strategy<Value = f64>) -> impl Strategy<Value = Segment> {
    (duration, 0.2f64..5.0, prop::bool::ANY, -2.0f64..2.0).prop_map(|(d, rate, exp, g)| {
        if exp {
            Segment::exponential(d, rate, g).unwrap()
        } else {
            Segment::constant(d, rate).unwrap()
        }
    })
}

/// Piecewise history with 1 to 4 finite segments.
pub fn finite_history() -> impl Strategy<Value = SizeHistory> {
    prop::collection::vec(segment(0.05f64..1.5), 1..=4)
        .prop_map(|s| SizeHistory::new(s).unwrap())
}

/// Finite segments followed by a constant infinite tail.
pub fn infinite_history() -> impl Strategy<Value = SizeHistory> {
    (prop::collection::vec(segment(0.05f64..1.5), 0..=3), 0.2f64..5.0).prop_map(|(mut s, a)| {
        s.push(Segment::constant(f64::INFINITY, a).unwrap());
        SizeHistory::new(s).unwrap()
    })
}

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Quadrature of `f` over `[0, t]`, split at segment boundaries.
pub fn piecewise_quad<F: Fn(f64) -> f64>(h: &SizeHistory, t: f64, f: F, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut start = 0.0;
    for s in h.segments() {
        if start >= t {
            break;
        }
        let end = (start + s.duration()).min(t);
        total += simpson(&f, start, end, tol);
        start = end;
    }
    total
}

/// Tavaré's alternating sum for `P_n(A_τ = m)` under a constant rate with
/// integrated rate `r`.
pub fn tavare(n: usize, m: usize, r: f64) -> f64 {
    let rising = |a: f64, k: usize| (0..k).map(|i| a + i as f64).product::<f64>();
    let falling = |a: f64, k: usize| (0..k).map(|i| a - i as f64).product::<f64>();
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let nf = n as f64;
    let mf = m as f64;
    (m..=n)
        .map(|k| {
            let sign = if (k - m).is_multiple_of(2) { 1.0 } else { -1.0 };
            let pairs = (k * (k - 1) / 2) as f64;
            let coef = (2.0 * k as f64 - 1.0) * rising(mf, k - 1) * falling(nf, k)
                / (fact(m) * fact(k - m) * rising(nf, k));
            sign * coef * (-pairs * r).exp()
        })
        .sum()
}

/// Dense `exp(r G)` of the pure-death process on `1..=n` with rates `C(k,2)`;
/// row `ν-1` is the law of the count started from `ν`.
pub fn death_process(n: usize, r: f64) -> nalgebra::DMatrix<f64> {
    let mut g = nalgebra::DMatrix::zeros(n, n);
    for k in 2..=n {
        let rate = (k * (k - 1) / 2) as f64;
        g[(k - 1, k - 1)] = -rate;
        g[(k - 1, k - 2)] = rate;
    }
    (g * r).exp()
}

/// Dense `exp(s Q)` of the Moran generator on `0..=n`.
pub fn moran_dense(n: usize, s: f64) -> nalgebra::DMatrix<f64> {
    let mut q = nalgebra::DMatrix::zeros(n + 1, n + 1);
    for i in 1..n {
        let r = (i * (n - i)) as f64;
        q[(i, i)] = -r;
        q[(i, i - 1)] = 0.5 * r;
        q[(i, i + 1)] = 0.5 * r;
    }
    (q * s).exp()
}

/// `Σ_{k1} C(n1,k1) C(n2,k-k1) / C(n,k) a(k1) b(k-k1)` evaluated term by term.
pub fn naive_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (n1, n2) = (a.len() - 1, b.len() - 1);
    let ln_choose = |n: usize, k: usize| {
        let lf = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
        lf(n) - lf(k) - lf(n - k)
    };
    (0..=n1 + n2)
        .map(|k| {
            (k.saturating_sub(n2)..=k.min(n1))
                .map(|k1| {
                    let w = (ln_choose(n1, k1) + ln_choose(n2, k - k1) - ln_choose(n1 + n2, k)).exp();
                    w * a[k1] * b[k - k1]
                })
                .sum()
        })
        .collect()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}
