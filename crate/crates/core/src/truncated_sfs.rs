//! The truncated sample frequency spectrum `f_ν^τ(k)`: the expected length of
//! genealogy branches within `[0, τ)` that subtend exactly `k` of `ν` sampled
//! lineages.
//!
//! The production route computes the top row `f_n^τ(k), k < n` as
//! `Σ_m W[k][m] c_m^τ` from universal weights and truncated first-coalescence
//! times, closes it with `f_n^τ(n) = τ - Σ_k (k/n) f_n^τ(k)`, and fills every
//! smaller sample size with the downward recurrence
//! `f_ν(k) = (ν-k+1)/(ν+1) f_{ν+1}(k) + (k+1)/(ν+1) f_{ν+1}(k+1)`.
//! A second route, valid for constant rates, goes through the ancestral-lineage
//! distribution ([`sfs_top_killing`]).

use alloc::vec::Vec;

use crate::{AncestralProbTable, Error, Result, SizeHistory};

/// Entries down to this value are treated as round-off and clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Weights `W[k][m]` (`1 ≤ k < n`, `2 ≤ m ≤ n`) expressing the SFS as a
/// linear combination of first-coalescence times.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    n: usize,
    w: Vec<f64>,
}

impl WeightTable {
    pub fn build(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("weights need a sample size of at least 2"));
        }
        let width = n - 1;
        let mut w = alloc::vec![0.0; width * width];
        let nf = n as f64;
        for k in 1..n {
            let row = &mut w[(k - 1) * width..k * width];
            let kf = k as f64;
            row[0] = 6.0 / (nf + 1.0);
            if n >= 3 {
                row[1] = 30.0 * (nf - 2.0 * kf) / ((nf + 1.0) * (nf + 2.0));
            }
            for m in 2..n - 1 {
                let mf = m as f64;
                let prev = row[m - 2];
                let cur = row[m - 1];
                row[m] = -(1.0 + mf) * (3.0 + 2.0 * mf) * (nf - mf)
                    / (mf * (2.0 * mf - 1.0) * (nf + mf + 1.0))
                    * prev
                    + (3.0 + 2.0 * mf) * (nf - 2.0 * kf) / (mf * (nf + mf + 1.0)) * cur;
            }
        }
        Ok(WeightTable { n, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `W[k][m]` for `1 ≤ k < n`, `2 ≤ m ≤ n`.
    pub fn get(&self, k: usize, m: usize) -> f64 {
        assert!((1..self.n).contains(&k) && (2..=self.n).contains(&m));
        self.w[(k - 1) * (self.n - 1) + (m - 2)]
    }

    fn row(&self, k: usize) -> &[f64] {
        let width = self.n - 1;
        &self.w[(k - 1) * width..k * width]
    }
}

/// `f_n^τ(k)` for `k = 1..n-1`; `tau = ∞` gives the untruncated SFS.
pub fn sfs_top(weights: &WeightTable, h: &SizeHistory, tau: f64) -> Result<Vec<f64>> {
    let n = weights.n();
    let c: Vec<f64> = (2..=n)
        .map(|m| h.first_coalescence_time(m, tau))
        .collect::<Result<_>>()?;
    (1..n)
        .map(|k| {
            let value: f64 = weights.row(k).iter().zip(&c).map(|(w, c)| w * c).sum();
            clamp_entry(value, "truncated SFS")
        })
        .collect()
}

/// Appends `f_n^τ(n) = τ - Σ_{k<n} (k/n) f_n^τ(k)` to a top row.
pub fn close_row(row: &[f64], tau: f64, n: usize) -> Result<Vec<f64>> {
    if row.len() + 1 != n {
        return Err(Error::domain("row length must be n - 1"));
    }
    if tau.is_infinite() {
        return Err(Error::Divergence(
            "the branch above the MRCA is infinite without truncation".into(),
        ));
    }
    let nf = n as f64;
    let tmrca: f64 = row
        .iter()
        .enumerate()
        .map(|(i, f)| (i + 1) as f64 / nf * f)
        .sum();
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(row);
    out.push(clamp_entry(tau - tmrca, "MRCA closure")?);
    Ok(out)
}

/// `f_n^τ(k)` for `k = 1..n-1` from the ancestral-lineage distribution; only
/// valid for a constant rate on `[0, τ)`.
pub fn sfs_top_killing(h: &SizeHistory, tau: f64, anc: &AncestralProbTable) -> Result<Vec<f64>> {
    let n = anc.n_max();
    if anc.tau() != tau {
        return Err(Error::domain("ancestral table built for a different truncation time"));
    }
    if tau == 0.0 {
        return Ok(alloc::vec![0.0; n.saturating_sub(1)]);
    }
    let alpha = h.constant_rate(tau).ok_or_else(|| {
        Error::UnsupportedHistory("the ancestral-lineage route needs a constant rate".into())
    })?;
    let probs = anc.row(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for k in 1..n {
        // C(n-m, k) / C(n-1, k), updated multiplicatively in m
        let mut ratio = 1.0;
        let mut acc = 0.0;
        for m in 1..=n - k {
            acc += ratio * probs[m - 1];
            ratio *= (n - m - k) as f64 / (n - m) as f64;
        }
        out.push(2.0 / (alpha * k as f64) * acc);
    }
    Ok(out)
}

fn clamp_entry(value: f64, context: &'static str) -> Result<f64> {
    if value < -NEGATIVE_TOLERANCE || value.is_nan() {
        return Err(Error::NumericalInstability { context, value });
    }
    Ok(value.max(0.0))
}

/// `f_ν^τ(k)` for all `1 ≤ k ≤ ν ≤ n`. For `τ = ∞` the diagonal `k = ν`
/// diverges and is stored as `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSfsTable {
    n: usize,
    tau: f64,
    rows: Vec<Vec<f64>>,
}

impl TruncatedSfsTable {
    /// Full table via weights, closure and the downward recurrence.
    pub fn build(h: &SizeHistory, tau: f64, n: usize) -> Result<Self> {
        Self::from_top_row(top_row(h, tau, n)?, tau)
    }

    /// Fills rows `ν = n-1, …, 1` from a complete top row `f_n^τ(1..=n)`.
    pub fn from_top_row(top: Vec<f64>, tau: f64) -> Result<Self> {
        let n = top.len();
        if n == 0 {
            return Err(Error::domain("empty top row"));
        }
        let mut rows = alloc::vec![Vec::new(); n];
        rows[n - 1] = top;
        for nu in (1..n).rev() {
            let above = &rows[nu];
            let denom = (nu + 1) as f64;
            let row: Vec<f64> = (1..=nu)
                .map(|k| {
                    let lower = (nu - k + 1) as f64 / denom * above[k - 1];
                    let upper = (k + 1) as f64 / denom * above[k];
                    lower + upper
                })
                .collect();
            rows[nu - 1] = row;
        }
        Ok(TruncatedSfsTable { n, tau, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `f_ν^τ(k)` for `k = 1..=ν` (diagonal infinite when `τ = ∞`).
    pub fn row(&self, nu: usize) -> &[f64] {
        &self.rows[nu - 1]
    }

    pub fn get(&self, nu: usize, k: usize) -> Result<f64> {
        if nu == 0 || nu > self.n || k == 0 || k > nu {
            return Err(Error::domain("index outside 1 ≤ k ≤ ν ≤ n"));
        }
        if k == nu && self.tau.is_infinite() {
            return Err(Error::Divergence("f_ν(ν) without truncation".into()));
        }
        Ok(self.rows[nu - 1][k - 1])
    }
}

/// Top row `f_n^τ(k)`, `k = 1..=n`; the last entry is `+∞` when `τ = ∞`.
pub fn top_row(h: &SizeHistory, tau: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let partial = if n == 1 {
        Vec::new()
    } else {
        sfs_top(&WeightTable::build(n)?, h, tau)?
    };
    if tau.is_infinite() {
        let mut row = partial;
        row.push(f64::INFINITY);
        Ok(row)
    } else {
        close_row(&partial, tau, n)
    }
}

/// Result of checking `E[T_MRCA ∧ τ] = Σ_{k<ν} (k/ν) f_ν^τ(k)` on one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrcaCheck {
    /// `Σ_{k<ν} (k/ν) f_ν^τ(k)`.
    pub tmrca: f64,
    /// `|tmrca - (τ - f_ν^τ(ν))|` for finite `τ`.
    pub closure_residual: Option<f64>,
    /// `|tmrca - 2(1 - 1/ν)/α|` for `τ = ∞` and a constant rate `α`.
    pub closed_form_residual: Option<f64>,
}

pub fn mrca_identity_check(table: &TruncatedSfsTable, h: &SizeHistory, nu: usize) -> MrcaCheck {
    let row = table.row(nu);
    let nf = nu as f64;
    let tmrca: f64 = row[..nu - 1]
        .iter()
        .enumerate()
        .map(|(i, f)| (i + 1) as f64 / nf * f)
        .sum();
    let tau = table.tau();
    let closure_residual = tau
        .is_finite()
        .then(|| (tmrca - (tau - row[nu - 1])).abs());
    let closed_form_residual = if tau.is_infinite() {
        h.constant_rate(tau)
            .map(|alpha| (tmrca - 2.0 * (1.0 - 1.0 / nf) / alpha).abs())
    } else {
        None
    };
    MrcaCheck {
        tmrca,
        closure_residual,
        closed_form_residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SizeHistory {
        SizeHistory::constant(f64::INFINITY, 1.0).unwrap()
    }

    #[test]
    fn weight_examples() {
        let w = WeightTable::build(5).unwrap();
        for k in 1..5 {
            assert_eq!(w.get(k, 2), 1.0);
        }
        let w = WeightTable::build(4).unwrap();
        assert_eq!(w.get(2, 3), 0.0);
        let w = WeightTable::build(2).unwrap();
        let f = sfs_top(&w, &unit(), f64::INFINITY).unwrap();
        assert_eq!(f, [2.0]);
        assert!(WeightTable::build(1).is_err());
    }

    #[test]
    fn weights_third_column() {
        let n = 9;
        let w = WeightTable::build(n).unwrap();
        for k in 1..n {
            let expected = 30.0 * (n as f64 - 2.0 * k as f64) / ((n + 1) * (n + 2)) as f64;
            assert!((w.get(k, 3) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn two_lineages_truncated() {
        let w = WeightTable::build(2).unwrap();
        let tau = 0.5;
        let f = sfs_top(&w, &unit(), tau).unwrap();
        let expected = 2.0 * (1.0 - (-tau).exp());
        assert!((f[0] - expected).abs() < 1e-15);
        let closed = close_row(&f, tau, 2).unwrap();
        assert!((closed[1] - (tau - (1.0 - (-tau).exp()))).abs() < 1e-15);
        let table = TruncatedSfsTable::from_top_row(closed, tau).unwrap();
        assert!((table.get(1, 1).unwrap() - tau).abs() < 1e-15);
    }

    #[test]
    fn empty_window_is_zero() {
        let w = WeightTable::build(3).unwrap();
        assert_eq!(sfs_top(&w, &unit(), 0.0).unwrap(), [0.0, 0.0]);
        assert_eq!(close_row(&[0.0, 0.0], 0.0, 3).unwrap()[2], 0.0);
    }

    #[test]
    fn single_lineage_row() {
        assert_eq!(close_row(&[], 1.25, 1).unwrap(), [1.25]);
        let table = TruncatedSfsTable::build(&unit(), 1.25, 1).unwrap();
        assert_eq!(table.get(1, 1).unwrap(), 1.25);
    }

    #[test]
    fn classical_spectrum_all_sample_sizes() {
        let table = TruncatedSfsTable::build(&unit(), f64::INFINITY, 10).unwrap();
        for nu in 2..=10 {
            for k in 1..nu {
                let f = table.get(nu, k).unwrap();
                assert!((f - 2.0 / k as f64).abs() < 1e-12 * 2.0 / k as f64, "{nu} {k} {f}");
            }
        }
        assert!(matches!(table.get(10, 10), Err(Error::Divergence(_))));
        assert!(matches!(close_row(&[2.0], f64::INFINITY, 2), Err(Error::Divergence(_))));
    }

    #[test]
    fn killing_route_small_cases() {
        let h = unit();
        let anc = AncestralProbTable::build(&h, f64::INFINITY, 2).unwrap();
        assert_eq!(sfs_top_killing(&h, f64::INFINITY, &anc).unwrap(), [2.0]);

        let h = SizeHistory::constant(f64::INFINITY, 2.0).unwrap();
        let anc = AncestralProbTable::build(&h, f64::INFINITY, 2).unwrap();
        assert_eq!(sfs_top_killing(&h, f64::INFINITY, &anc).unwrap(), [1.0]);
    }

    #[test]
    fn killing_route_rejects_exponential() {
        let h = SizeHistory::exponential(f64::INFINITY, 1.0, 0.5).unwrap();
        let anc = AncestralProbTable::build(&h, 1.0, 5).unwrap();
        assert!(matches!(
            sfs_top_killing(&h, 1.0, &anc),
            Err(Error::UnsupportedHistory(_))
        ));
    }

    #[test]
    fn mrca_identity_examples() {
        let h = unit();
        let table = TruncatedSfsTable::build(&h, f64::INFINITY, 10).unwrap();
        let check = mrca_identity_check(&table, &h, 10);
        assert!((check.tmrca - 1.8).abs() < 1e-14);
        assert!(check.closed_form_residual.unwrap() < 1e-14);

        let table = TruncatedSfsTable::build(&h, 0.5, 2).unwrap();
        let check = mrca_identity_check(&table, &h, 2);
        assert!((check.tmrca - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!(check.closure_residual.unwrap() < 1e-15);

        let table = TruncatedSfsTable::build(&h, 0.0, 4).unwrap();
        let check = mrca_identity_check(&table, &h, 4);
        assert_eq!(check.tmrca, 0.0);
        assert_eq!(check.closure_residual, Some(0.0));
    }
}
