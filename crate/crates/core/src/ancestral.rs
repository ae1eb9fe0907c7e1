//! Distribution of the number of ancestral lineages `A_τ` of a sample.
//!
//! `P_ν(A_τ = m)` is tabulated for every `m ≤ ν ≤ n` with the
//! sample-size recursion
//!
//! ```text
//! P_ν(m) = [P_{ν-1}(m) - (m+1)m/(ν(ν-1)) · P_ν(m+1)] / (1 - m(m-1)/(ν(ν-1)))
//! ```
//!
//! seeded with `P_ν(ν) = exp(-C(ν,2) R(τ))`. The recursion subtracts terms
//! of similar size, and for small `C(n,2)·R(τ)` it amplifies round-off without
//! bound; a running first-order error bound is carried alongside the values
//! and the build fails with [`Error::NumericalInstability`] once it exceeds
//! [`ERROR_BOUND`].

use alloc::vec::Vec;

use crate::math::{exp, pairs};
use crate::{Error, Result, SizeHistory};

/// Largest tolerated propagated error bound on any table entry.
pub const ERROR_BOUND: f64 = 1e-10;
/// Negative round-off up to this size is clamped to zero.
pub const CLAMP: f64 = 1e-12;

/// Transition probability of the Pólya urn: starting from `i` balls of which
/// `j` are black, the probability of ending with `nu` balls of which `k` are
/// black.
pub fn polya_prob(nu: usize, i: usize, k: usize, j: usize) -> Result<f64> {
    if j > i || i > nu || k > nu {
        return Err(Error::domain("Pólya urn indices need j ≤ i ≤ ν and k ≤ ν"));
    }
    if (j == 0 && k == 0) || (i == j && nu == k) {
        return Ok(1.0);
    }
    if k >= j && j > 0 && nu - k >= i - j && i > j {
        let ln = ln_binomial(k - 1, j - 1) + ln_binomial(nu - k - 1, i - j - 1)
            - ln_binomial(nu - 1, i - 1);
        return Ok(exp(ln));
    }
    Ok(0.0)
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let lg = |x: usize| libm::lgamma(x as f64 + 1.0);
    lg(n) - lg(k) - lg(n - k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AncestralProbTable {
    n_max: usize,
    tau: f64,
    rows: Vec<Vec<f64>>,
}

impl AncestralProbTable {
    /// Builds `P_ν(A_τ = m)` for `1 ≤ m ≤ ν ≤ n` under history `h`.
    pub fn build(h: &SizeHistory, tau: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("sample size must be at least 1"));
        }
        let r = h.integrated_rate(tau)?;
        let u = f64::EPSILON;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        rows.push(alloc::vec![1.0]);
        let mut prev_err = alloc::vec![0.0];
        for nu in 2..=n {
            let mut row = alloc::vec![0.0; nu];
            let mut err = alloc::vec![0.0; nu];
            let exponent = pairs(nu) * r;
            row[nu - 1] = exp(-exponent);
            err[nu - 1] = if exponent.is_finite() {
                u * row[nu - 1] * (1.0 + exponent)
            } else {
                0.0
            };
            let prev = &rows[nu - 2];
            let d = (nu * (nu - 1)) as f64;
            for m in (1..nu).rev() {
                let a = ((m + 1) * m) as f64 / d;
                let scale = 1.0 / (1.0 - ((m * (m - 1)) as f64) / d);
                let upper = row[m];
                let value = (prev[m - 1] - a * upper) * scale;
                err[m - 1] = (prev_err[m - 1]
                    + a * err[m]
                    + u * (prev[m - 1].abs() + a * upper.abs()))
                    * scale
                    + u * value.abs();
                if err[m - 1] > ERROR_BOUND {
                    return Err(Error::NumericalInstability {
                        context: "ancestral-lineage recursion",
                        value: err[m - 1],
                    });
                }
                row[m - 1] = clamp_probability(value)?;
            }
            rows.push(row);
            prev_err = err;
        }
        Ok(AncestralProbTable { n_max: n, tau, rows })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `P_ν(A_τ = m)` for `m = 1..=ν`.
    pub fn row(&self, nu: usize) -> &[f64] {
        &self.rows[nu - 1]
    }

    /// `P_ν(A_τ = m)`; zero outside `1 ≤ m ≤ ν`.
    pub fn prob(&self, nu: usize, m: usize) -> f64 {
        if m == 0 || m > nu {
            0.0
        } else {
            self.rows[nu - 1][m - 1]
        }
    }
}

fn clamp_probability(p: f64) -> Result<f64> {
    if !(-CLAMP..=1.0 + CLAMP).contains(&p) {
        return Err(Error::NumericalInstability {
            context: "ancestral-lineage recursion",
            value: p,
        });
    }
    Ok(p.clamp(0.0, 1.0))
}
