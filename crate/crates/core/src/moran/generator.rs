/// Generator of the derived-allele count of a Moran model with `n` lineages,
/// per unit of integrated coalescence rate: from state `i` the count moves up
/// or down at rate `i(n-i)/2` each. States `0` and `n` are absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MoranRateMatrix {
    n: usize,
}

impl MoranRateMatrix {
    pub fn new(n: usize) -> Self {
        MoranRateMatrix { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `i(n - i)` as a float.
    #[inline]
    pub(crate) fn exit_rate(&self, i: usize) -> f64 {
        (i * (self.n - i)) as f64
    }

    /// `q_ij` for `0 ≤ i, j ≤ n`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i <= self.n && j <= self.n);
        if i == j {
            -self.exit_rate(i)
        } else if i.abs_diff(j) == 1 {
            0.5 * self.exit_rate(i)
        } else {
            0.0
        }
    }

    /// Largest exit rate `⌊n/2⌋⌈n/2⌉`.
    pub fn max_exit_rate(&self) -> f64 {
        let half = self.n / 2;
        (half * (self.n - half)) as f64
    }

    /// `out = Q v`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert!(v.len() == n + 1 && out.len() == n + 1);
        out[0] = 0.0;
        out[n] = 0.0;
        for i in 1..n {
            let r = self.exit_rate(i);
            out[i] = r * (0.5 * (v[i - 1] + v[i + 1]) - v[i]);
        }
    }
}
