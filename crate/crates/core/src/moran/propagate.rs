//! Action of `exp(s Q)` on a vector, for the Moran generator `Q`.
//!
//! Two methods are available:
//!
//! * uniformization, `Σ_k Pois(k; Λs) Pᵏ v` with `P = I + Q/Λ`, whose cost
//!   grows with `Λs ≈ n² s / 4`;
//! * a truncated spectral expansion. The transient block of `Q` (states
//!   `1..n-1`) is similar to a symmetric tridiagonal matrix with eigenvalues
//!   `-C(j,2)`, `j = 2..n`. Modes with `C(j,2) s > SPECTRAL_CUTOFF` have decayed
//!   below `e^{-40}` and are dropped, so the number of retained modes depends on
//!   `s` only and each application costs `O(n)` for fixed `s`.
//!
//! The absorbing states are handled exactly: `1` and `i/n` are harmonic for
//! `Q`, so the boundary values are carried by `a + b·i/n` and only the
//! remainder, which vanishes at `0` and `n`, evolves through the transient
//! block.

use alloc::vec::Vec;

use super::generator::MoranRateMatrix;
use crate::math::{exp, pairs, sqrt};

/// Modes decaying faster than `e^{-SPECTRAL_CUTOFF}` are dropped.
pub const SPECTRAL_CUTOFF: f64 = 40.0;
/// Poisson terms below this weight (past the mean) end a uniformization sum.
const POISSON_TAIL: f64 = 1e-18;
/// Largest `Λs` handled in one uniformization sub-step.
const UNIFORMIZATION_CHUNK: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionMethod {
    /// Cheapest of the two by operation count.
    #[default]
    Auto,
    Uniformization,
    Spectral,
}

#[derive(Debug, Clone)]
pub struct Propagator {
    q: MoranRateMatrix,
    s: f64,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Identity,
    Uniformization {
        rate: f64,
        steps: usize,
        weights: Vec<f64>,
    },
    Spectral {
        /// `sqrt(i(n-i))`, the symmetrizing scale of state `i`.
        scale: Vec<f64>,
        decay: Vec<f64>,
        /// Orthonormal eigenvectors of the symmetrized transient block,
        /// concatenated.
        modes: Vec<f64>,
    },
}

impl Propagator {
    /// Propagator for `exp(s Q)` on `n` lineages.
    pub fn new(n: usize, s: f64, method: ActionMethod) -> Self {
        let q = MoranRateMatrix::new(n);
        if n < 2 || s == 0.0 {
            return Propagator {
                q,
                s,
                kind: Kind::Identity,
            };
        }
        let method = match method {
            ActionMethod::Auto => {
                let (steps, terms) = uniformization_plan(q.max_exit_rate() * s);
                let uniform_cost = (steps * terms) as f64 * 4.0 * (n + 1) as f64;
                let spectral_cost = (2 * retained_modes(n, s) + 4) as f64 * (n - 1) as f64;
                if spectral_cost < uniform_cost {
                    ActionMethod::Spectral
                } else {
                    ActionMethod::Uniformization
                }
            }
            m => m,
        };
        let kind = match method {
            ActionMethod::Spectral => spectral(n, s),
            _ => {
                let rate = q.max_exit_rate();
                let (steps, _) = uniformization_plan(rate * s);
                let weights = poisson_weights(rate * s / steps as f64);
                Kind::Uniformization {
                    rate,
                    steps,
                    weights,
                }
            }
        };
        Propagator { q, s, kind }
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }

    /// Integrated rate `s` this propagator advances by.
    pub fn integrated_rate(&self) -> f64 {
        self.s
    }

    pub fn method(&self) -> Option<ActionMethod> {
        match self.kind {
            Kind::Identity => None,
            Kind::Uniformization { .. } => Some(ActionMethod::Uniformization),
            Kind::Spectral { .. } => Some(ActionMethod::Spectral),
        }
    }

    /// `exp(s Q) v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.q.n();
        assert_eq!(v.len(), n + 1, "vector length must be n + 1");
        match &self.kind {
            Kind::Identity => v.to_vec(),
            Kind::Uniformization {
                rate,
                steps,
                weights,
            } => {
                let mut cur = v.to_vec();
                let mut power = alloc::vec![0.0; n + 1];
                let mut scratch = alloc::vec![0.0; n + 1];
                let mut acc = alloc::vec![0.0; n + 1];
                for _ in 0..*steps {
                    power.copy_from_slice(&cur);
                    for (a, p) in acc.iter_mut().zip(&power) {
                        *a = weights[0] * p;
                    }
                    for &w in &weights[1..] {
                        self.q.apply_into(&power, &mut scratch);
                        for ((p, q), a) in power.iter_mut().zip(&scratch).zip(acc.iter_mut()) {
                            *p += q / rate;
                            *a += w * *p;
                        }
                    }
                    core::mem::swap(&mut cur, &mut acc);
                }
                cur
            }
            Kind::Spectral {
                scale,
                decay,
                modes,
            } => {
                let a = v[0];
                let b = v[n] - v[0];
                let nf = n as f64;
                let inner = n - 1;
                let y: Vec<f64> = (1..n)
                    .map(|i| (v[i] - a - b * i as f64 / nf) / scale[i - 1])
                    .collect();
                let mut z = alloc::vec![0.0; inner];
                for (mode, &d) in modes.chunks_exact(inner).zip(decay) {
                    let coef = d * dot(mode, &y);
                    for (zi, ui) in z.iter_mut().zip(mode) {
                        *zi += coef * ui;
                    }
                }
                let mut out = Vec::with_capacity(n + 1);
                out.push(v[0]);
                for i in 1..n {
                    out.push(a + b * i as f64 / nf + scale[i - 1] * z[i - 1]);
                }
                out.push(v[n]);
                out
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Number of eigenmodes `j = 2..=n` with `C(j,2) s ≤ SPECTRAL_CUTOFF`.
fn retained_modes(n: usize, s: f64) -> usize {
    (2..=n).take_while(|&j| pairs(j) * s <= SPECTRAL_CUTOFF).count()
}

/// Sub-steps and Poisson terms per sub-step for total uniformized time `x`.
fn uniformization_plan(x: f64) -> (usize, usize) {
    let steps = libm::ceil(x / UNIFORMIZATION_CHUNK).max(1.0) as usize;
    (steps, poisson_weights(x / steps as f64).len())
}

fn poisson_weights(x: f64) -> Vec<f64> {
    let mut w = alloc::vec![exp(-x)];
    let mut k = 0usize;
    loop {
        let next = w[k] * x / (k + 1) as f64;
        k += 1;
        if k as f64 > x && next < POISSON_TAIL {
            break;
        }
        w.push(next);
    }
    w
}

fn spectral(n: usize, s: f64) -> Kind {
    let inner = n - 1;
    let scale: Vec<f64> = (1..n).map(|i| sqrt((i * (n - i)) as f64)).collect();
    let diag: Vec<f64> = (1..n).map(|i| -((i * (n - i)) as f64)).collect();
    let off: Vec<f64> = (0..inner.saturating_sub(1))
        .map(|i| 0.5 * scale[i] * scale[i + 1])
        .collect();
    let count = retained_modes(n, s);
    let mut decay = Vec::with_capacity(count);
    let mut modes = Vec::with_capacity(count * inner);
    for j in 2..2 + count {
        let lambda = -pairs(j);
        decay.push(exp(lambda * s));
        modes.extend(eigenvector(&diag, &off, lambda));
    }
    Kind::Spectral {
        scale,
        decay,
        modes,
    }
}

/// Unit eigenvector of the symmetric tridiagonal matrix `(diag, off)` for the
/// known simple eigenvalue `lambda`, by inverse iteration.
fn eigenvector(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let m = diag.len();
    let shift = lambda + 1e-10 * (1.0 + lambda.abs());
    // pseudo-random start so that no mode is nearly orthogonal to it
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut x: Vec<f64> = (0..m)
        .map(|_| {
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    for _ in 0..3 {
        let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        x = solve_tridiagonal(off, &shifted, off, &x);
        let norm = sqrt(dot(&x, &x));
        x.iter_mut().for_each(|xi| *xi /= norm);
    }
    x
}

/// Solves a tridiagonal system by Gaussian elimination with partial pivoting.
/// Exactly singular pivots are replaced by a tiny value.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut dl = lower.to_vec();
    let mut du = upper.to_vec();
    let mut b = rhs.to_vec();
    let tiny = sqrt(f64::MIN_POSITIVE);
    if n == 1 {
        return alloc::vec![b[0] / if d[0] == 0.0 { tiny } else { d[0] }];
    }
    // dl[i] holds the second superdiagonal fill-in after an interchange
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let temp = b[i];
            b[i] = b[i + 1];
            b[i + 1] = temp - fact * b[i + 1];
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn two_lineages_closed_form() {
        for method in [ActionMethod::Uniformization, ActionMethod::Spectral] {
            for s in [0.01, 0.3, 2.0, 30.0] {
                let p = Propagator::new(2, s, method);
                let e = (-s).exp();
                let out = p.apply(&[0.0, 1.0, 0.0]);
                assert!(max_diff(&out, &[0.0, e, 0.0]) < 1e-14, "{method:?} {s} {out:?}");
                // row 1 of exp(sQ), i.e. the law of the count started from 1
                let row: Vec<f64> = (0..3)
                    .map(|j| {
                        let mut unit = [0.0; 3];
                        unit[j] = 1.0;
                        p.apply(&unit)[1]
                    })
                    .collect();
                let expected = [(1.0 - e) / 2.0, e, (1.0 - e) / 2.0];
                assert!(max_diff(&row, &expected) < 1e-14, "{method:?} {s} {row:?}");
            }
        }
    }

    #[test]
    fn single_lineage_and_zero_time_are_identity() {
        let p = Propagator::new(1, 3.0, ActionMethod::Auto);
        assert_eq!(p.apply(&[0.25, 0.75]), [0.25, 0.75]);
        let p = Propagator::new(6, 0.0, ActionMethod::Auto);
        let v = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        assert_eq!(p.apply(&v), v);
        assert_eq!(p.method(), None);
    }

    #[test]
    fn methods_agree() {
        for n in [3, 7, 20, 41] {
            for s in [0.02, 0.4, 3.0] {
                let v: Vec<f64> = (0..=n).map(|i| ((i * 7 + 3) % 11) as f64 / 10.0).collect();
                let a = Propagator::new(n, s, ActionMethod::Uniformization).apply(&v);
                let b = Propagator::new(n, s, ActionMethod::Spectral).apply(&v);
                assert!(max_diff(&a, &b) < 1e-11, "n={n} s={s} diff={}", max_diff(&a, &b));
            }
        }
    }

    #[test]
    fn harmonic_functions_are_fixed() {
        let n = 30;
        let v: Vec<f64> = (0..=n).map(|i| 0.2 + 0.5 * i as f64 / n as f64).collect();
        for method in [ActionMethod::Uniformization, ActionMethod::Spectral] {
            let out = Propagator::new(n, 0.7, method).apply(&v);
            assert!(max_diff(&out, &v) < 1e-13);
        }
    }

    #[test]
    fn tridiagonal_solver() {
        let lower = [1.0, 2.0, 0.5];
        let diag = [0.001, 3.0, 1.0, 4.0];
        let upper = [2.0, -1.0, 1.5];
        let x = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut r = diag[i] * x[i];
                if i > 0 {
                    r += lower[i - 1] * x[i - 1];
                }
                if i < 3 {
                    r += upper[i] * x[i + 1];
                }
                r
            })
            .collect();
        let got = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        assert!(max_diff(&got, &x) < 1e-12);
    }
}
