//! Merging two child likelihood vectors at a split.
//!
//! With `n = n1 + n2` lineages at the bottom of the parent,
//!
//! ```text
//! ℓ(k) = Σ_{k1} h(k1; k) ℓ1(k1) ℓ2(k - k1),
//! h(k1; k) = C(n1,k1) C(n2,k-k1) / C(n,k),
//! ```
//!
//! which is the convolution `ℓ̃ = ℓ̃1 * ℓ̃2` of the binomially weighted vectors
//! `ℓ̃(k) = C(n,k) ℓ(k)`, divided by `C(n,k)`.
//!
//! Convolving `ℓ̃` directly loses all relative accuracy in the tails once the
//! binomial coefficients span more than `1/ε`. Both paths here avoid that:
//!
//! * the direct path sums `h(k1; k) ℓ1 ℓ2` with precomputed hypergeometric
//!   weights, dropping weights below `WEIGHT_CUTOFF`;
//! * the FFT path (with `std`) convolves `Bin(n1,p)·ℓ1` with `Bin(n2,p)·ℓ2` and
//!   divides by `Bin(n,p)`, which is exact algebraically for any `p`. Each
//!   tilt `p` is only trusted where `Bin(n,p)(k)` is within a factor 4 of its
//!   peak, so several tilts cover `0..=n`.

use alloc::vec::Vec;

use crate::math::{exp, ln, sqrt, LnFactorials};

/// Hypergeometric weights below this are dropped by the direct path.
pub const WEIGHT_CUTOFF: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    /// Direct below [`EngineOptions::fft_threshold`](super::EngineOptions), FFT above.
    #[default]
    Auto,
    Direct,
    /// Falls back to `Direct` without the `std` feature.
    Fft,
}

/// Entry-independent data for one split with child sizes `n1`, `n2`.
#[derive(Clone)]
pub struct Convolver {
    n1: usize,
    n2: usize,
    kind: Kind,
}

impl core::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let kind = match self.kind {
            Kind::Direct(_) => "direct",
            #[cfg(feature = "std")]
            Kind::Fft(_) => "fft",
        };
        f.debug_struct("Convolver")
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .field("kind", &kind)
            .finish()
    }
}

#[derive(Clone)]
enum Kind {
    Direct(Vec<WeightRow>),
    #[cfg(feature = "std")]
    Fft(fft::Plan),
}

#[derive(Debug, Clone)]
struct WeightRow {
    first: usize,
    weights: Vec<f64>,
}

impl Convolver {
    /// `fft_threshold` only matters for [`ConvolutionMethod::Auto`]: the FFT
    /// path is used when `n1 + n2 > fft_threshold`.
    pub fn new(
        n1: usize,
        n2: usize,
        method: ConvolutionMethod,
        fft_threshold: usize,
        lnf: &LnFactorials,
    ) -> Self {
        let use_fft = match method {
            ConvolutionMethod::Auto => n1 + n2 > fft_threshold,
            ConvolutionMethod::Direct => false,
            ConvolutionMethod::Fft => true,
        };
        #[cfg(feature = "std")]
        if use_fft && n1 > 0 && n2 > 0 {
            return Convolver {
                n1,
                n2,
                kind: Kind::Fft(fft::Plan::new(n1, n2, lnf)),
            };
        }
        let _ = use_fft;
        Convolver {
            n1,
            n2,
            kind: Kind::Direct(direct_weights(n1, n2, lnf)),
        }
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn is_fft(&self) -> bool {
        match self.kind {
            Kind::Direct(_) => false,
            #[cfg(feature = "std")]
            Kind::Fft(_) => true,
        }
    }

    /// Parent bottom vector from the children's top vectors.
    pub fn apply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(a.len(), self.n1 + 1, "first child vector has wrong length");
        assert_eq!(b.len(), self.n2 + 1, "second child vector has wrong length");
        match &self.kind {
            Kind::Direct(rows) => rows
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    row.weights
                        .iter()
                        .enumerate()
                        .map(|(j, w)| {
                            let k1 = row.first + j;
                            w * a[k1] * b[k - k1]
                        })
                        .sum()
                })
                .collect(),
            #[cfg(feature = "std")]
            Kind::Fft(plan) => plan.apply(a, b),
        }
    }
}

/// `h(k1; k)` for every `k`, walking out from the mode in both directions.
fn direct_weights(n1: usize, n2: usize, lnf: &LnFactorials) -> Vec<WeightRow> {
    let n = n1 + n2;
    (0..=n)
        .map(|k| {
            let lo = k.saturating_sub(n2);
            let hi = k.min(n1);
            let mode = ((k + 1) * (n1 + 1) / (n + 2)).clamp(lo, hi);
            let h_mode = exp(
                lnf.ln_binomial(n1, mode) + lnf.ln_binomial(n2, k - mode) - lnf.ln_binomial(n, k),
            );
            let mut down = Vec::new();
            let mut h = h_mode;
            let mut k1 = mode;
            while k1 > lo {
                h *= (k1 * (n2 + k1 - k)) as f64 / ((n1 - k1 + 1) * (k - k1 + 1)) as f64;
                k1 -= 1;
                if h < WEIGHT_CUTOFF {
                    break;
                }
                down.push(h);
            }
            let first = mode - down.len();
            let mut weights: Vec<f64> = down.into_iter().rev().collect();
            weights.push(h_mode);
            let mut h = h_mode;
            let mut k1 = mode;
            while k1 < hi {
                h *= ((n1 - k1) * (k - k1)) as f64 / ((k1 + 1) * (n2 + k1 + 1 - k)) as f64;
                k1 += 1;
                if h < WEIGHT_CUTOFF {
                    break;
                }
                weights.push(h);
            }
            WeightRow { first, weights }
        })
        .collect()
}

/// `ln Bin(n, p)(k)` for `k = 0..=n`.
#[cfg_attr(not(feature = "std"), allow(dead_code))]
fn ln_binomial_pmf(n: usize, p: f64, lnf: &LnFactorials) -> Vec<f64> {
    let (lp, lq) = (ln(p), ln(1.0 - p));
    (0..=n)
        .map(|k| lnf.ln_binomial(n, k) + k as f64 * lp + (n - k) as f64 * lq)
        .collect()
}

/// Tilts `p` covering `0..=n`, each with the range `lo..=hi` of `k` it is
/// trusted on. Ranges are disjoint and ordered.
#[cfg_attr(not(feature = "std"), allow(dead_code))]
fn tilts(n: usize, lnf: &LnFactorials) -> Vec<(f64, usize, usize)> {
    let nf = n as f64;
    let clamp = |p: f64| p.clamp(0.5 / nf, 1.0 - 0.5 / nf);
    let mut out = Vec::new();
    let mut next = 0usize;
    while next <= n {
        let q = clamp(next as f64 / nf);
        let mut step = (sqrt(nf * q * (1.0 - q)) as usize).max(1);
        loop {
            let c = (next + step).min(n);
            let p = clamp(c as f64 / nf);
            let pmf = ln_binomial_pmf(n, p, lnf);
            let peak = pmf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let cut = peak - ln(4.0);
            if pmf[next] >= cut || step == 0 {
                let mut hi = next;
                while hi < n && pmf[hi + 1] >= cut {
                    hi += 1;
                }
                out.push((p, next, hi));
                next = hi + 1;
                break;
            }
            step /= 2;
        }
    }
    out
}

#[cfg(feature = "std")]
mod fft {
    use std::sync::Arc;

    use rustfft::num_complex::Complex64;
    use rustfft::{Fft, FftPlanner};

    use super::{ln_binomial_pmf, tilts};
    use crate::math::{exp, LnFactorials};

    #[derive(Clone)]
    struct Tilt {
        pmf1: Vec<f64>,
        pmf2: Vec<f64>,
        lo: usize,
        inv_pmf: Vec<f64>,
    }

    #[derive(Clone)]
    pub(super) struct Plan {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        len: usize,
        tilts: Vec<Tilt>,
    }

    impl Plan {
        pub(super) fn new(n1: usize, n2: usize, lnf: &LnFactorials) -> Self {
            let n = n1 + n2;
            let len = (n + 1).next_power_of_two();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(len);
            let inverse = planner.plan_fft_inverse(len);
            let tilts = tilts(n, lnf)
                .into_iter()
                .map(|(p, lo, hi)| {
                    let pmf1 = ln_binomial_pmf(n1, p, lnf).into_iter().map(exp).collect();
                    let pmf2 = ln_binomial_pmf(n2, p, lnf).into_iter().map(exp).collect();
                    let pmf = ln_binomial_pmf(n, p, lnf);
                    let inv_pmf = (lo..=hi).map(|k| exp(-pmf[k])).collect();
                    Tilt {
                        pmf1,
                        pmf2,
                        lo,
                        inv_pmf,
                    }
                })
                .collect();
            Plan {
                forward,
                inverse,
                len,
                tilts,
            }
        }

        pub(super) fn apply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
            let n = a.len() + b.len() - 2;
            let mut out = vec![0.0; n + 1];
            let zero = Complex64::new(0.0, 0.0);
            let mut fa = vec![zero; self.len];
            let mut fb = vec![zero; self.len];
            let scale = 1.0 / self.len as f64;
            for t in &self.tilts {
                fa.iter_mut().for_each(|z| *z = zero);
                fb.iter_mut().for_each(|z| *z = zero);
                for (k, (x, w)) in a.iter().zip(&t.pmf1).enumerate() {
                    fa[k].re = x * w;
                }
                for (k, (x, w)) in b.iter().zip(&t.pmf2).enumerate() {
                    fb[k].re = x * w;
                }
                self.forward.process(&mut fa);
                self.forward.process(&mut fb);
                for (x, y) in fa.iter_mut().zip(&fb) {
                    *x *= y;
                }
                self.inverse.process(&mut fa);
                for (j, inv) in t.inv_pmf.iter().enumerate() {
                    out[t.lo + j] = fa[t.lo + j].re * scale * inv;
                }
            }
            out
        }
    }
}
