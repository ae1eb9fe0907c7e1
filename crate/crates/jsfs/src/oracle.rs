//! Monte Carlo coalescent simulation on a population tree.
//!
//! Genealogies are simulated population by population from the leaves up.
//! Within a population, the waiting time to the next coalescence among `m`
//! lineages is drawn by inverting the integrated rate:
//! `R(t') = R(t) + E / C(m,2)` with `E ~ Exp(1)`. Branch lengths are recorded
//! directly, so with `θ/2 = 1` the mean length of branches subtending `x`
//! estimates `f(x)`.
//!
//! Replicates are split into fixed chunks of [`CHUNK`]; chunk `c` uses a
//! ChaCha8 stream `c` under the user's seed, and chunk statistics are merged
//! in order. Results therefore do not depend on the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use jsfs_core::{DemographyTree, SizeHistory};

pub const CHUNK: u64 = 10_000;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// `(value - mean) / stderr`.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.stderr > 0.0 {
            (value - self.mean) / self.stderr
        } else if value == self.mean {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn from_sums(n: f64, sum: f64, sumsq: f64) -> Self {
        let mean = sum / n;
        Moments {
            n,
            mean,
            m2: (sumsq - sum * mean).max(0.0),
        }
    }

    /// Chan et al. pairwise update.
    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }

    fn estimate(&self) -> Estimate {
        let stderr = if self.n > 1.0 {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        } else {
            f64::INFINITY
        };
        Estimate {
            mean: self.mean,
            stderr,
        }
    }
}

/// Mixed-radix encoding of derived-count vectors `x`; merging two lineages
/// adds their codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIndex {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    cells: usize,
}

impl ConfigIndex {
    pub fn new(sizes: &[usize]) -> Self {
        let mut strides = vec![0; sizes.len()];
        let mut cells = 1usize;
        for i in (0..sizes.len()).rev() {
            strides[i] = cells;
            cells *= sizes[i] + 1;
        }
        ConfigIndex {
            sizes: sizes.to_vec(),
            strides,
            cells,
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn encode(&self, x: &[usize]) -> usize {
        x.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let c = code / s;
                code %= s;
                c
            })
            .collect()
    }

    /// Code of a single sampled lineage from population `pop`.
    pub fn unit(&self, pop: usize) -> usize {
        self.strides[pop]
    }

    pub fn is_polymorphic(&self, code: usize) -> bool {
        code != 0 && self.decode(code) != self.sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenealogyNode {
    pub parent: Option<usize>,
    /// Time of the node, measured back from the most recently sampled
    /// population.
    pub height: f64,
    /// `(population, index)` for sampled lineages.
    pub label: Option<(usize, usize)>,
    /// Code of the leaf-count vector subtended by the node.
    pub config: usize,
}

/// A simulated genealogy. Leaves come first, in population order, then
/// coalescence nodes in order of creation; the last node is the MRCA.
///
/// Leaf heights are the sampling times implied by the population durations:
/// the leaves of population `i` sit at `D - d_i`, where `d_i` is the total
/// duration from leaf `i` up to the root population and `D = max_i d_i`.
/// All leaves have height 0 when every `d_i` is equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Genealogy {
    pub nodes: Vec<GenealogyNode>,
    pub index: ConfigIndex,
}

impl Genealogy {
    pub fn mrca(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Length of the branch above `node`; zero for the MRCA.
    pub fn branch_length(&self, node: usize) -> f64 {
        let n = &self.nodes[node];
        n.parent.map_or(0.0, |p| self.nodes[p].height - n.height)
    }

    /// Leaf-count vector subtended by `node`.
    pub fn counts(&self, node: usize) -> Vec<usize> {
        self.index.decode(self.nodes[node].config)
    }

    /// Blocks of the sample partition at height `t`: the leaves below each
    /// branch crossing `t`. Leaves sampled further back than `t` are left out.
    pub fn partition_at(&self, t: f64) -> Vec<Vec<(usize, usize)>> {
        let mut blocks: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        for (j, node) in self.nodes.iter().enumerate() {
            let Some(label) = node.label else { continue };
            if node.height > t {
                continue;
            }
            let mut k = j;
            while let Some(p) = self.nodes[k].parent {
                if self.nodes[p].height > t {
                    break;
                }
                k = p;
            }
            match blocks.iter_mut().find(|(top, _)| *top == k) {
                Some((_, leaves)) => leaves.push(label),
                None => blocks.push((k, vec![label])),
            }
        }
        blocks.into_iter().map(|(_, leaves)| leaves).collect()
    }
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Simulates one genealogy.
pub fn simulate_genealogy<R: Rng>(tree: &DemographyTree, index: &ConfigIndex, rng: &mut R) -> Genealogy {
    // absolute bottom time of each population
    let mut bottom = vec![0.0; tree.vertices().len()];
    let depth_to_root = |leaf: usize| {
        let mut d = 0.0;
        let mut v = tree.vertex(leaf);
        while let Some(p) = v.parent {
            d += v.duration();
            v = tree.vertex(p);
        }
        d
    };
    let depths: Vec<f64> = tree.leaves().iter().map(|&l| depth_to_root(l)).collect();
    let deepest = depths.iter().cloned().fold(0.0, f64::max);
    for (i, &l) in tree.leaves().iter().enumerate() {
        bottom[l] = deepest - depths[i];
    }
    let mut nodes = Vec::new();
    let mut active: Vec<Vec<usize>> = vec![Vec::new(); tree.vertices().len()];
    for &id in tree.postorder() {
        let v = tree.vertex(id);
        let mut lineages = match v.children {
            Some([a, b]) => {
                bottom[id] = bottom[a] + tree.vertex(a).duration();
                let mut l = std::mem::take(&mut active[a]);
                l.append(&mut active[b]);
                l
            }
            None => {
                let pop = v.leaf_index.expect("leaf index");
                (0..v.sample_size)
                    .map(|j| {
                        nodes.push(GenealogyNode {
                            parent: None,
                            height: bottom[id],
                            label: Some((pop, j)),
                            config: index.unit(pop),
                        });
                        nodes.len() - 1
                    })
                    .collect()
            }
        };
        coalesce_within(&v.history, v.duration(), bottom[id], &mut lineages, &mut nodes, rng);
        active[id] = lineages;
    }
    Genealogy {
        nodes,
        index: index.clone(),
    }
}

fn coalesce_within<R: Rng>(
    h: &SizeHistory,
    duration: f64,
    start: f64,
    lineages: &mut Vec<usize>,
    nodes: &mut Vec<GenealogyNode>,
    rng: &mut R,
) {
    if duration == 0.0 {
        return;
    }
    let r_end = h.integrated_rate(duration).unwrap_or(f64::INFINITY);
    let mut r = 0.0;
    while lineages.len() >= 2 {
        let m = lineages.len();
        r += exp1(rng) / (m * (m - 1) / 2) as f64;
        if r >= r_end {
            break;
        }
        let t = h
            .inverse_integrated_rate(r)
            .expect("integrated rate below the segment total");
        let i = rng.random_range(0..m);
        let mut j = rng.random_range(0..m - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = (lineages[i], lineages[j]);
        let parent = nodes.len();
        nodes.push(GenealogyNode {
            parent: None,
            height: start + t,
            label: None,
            config: nodes[a].config + nodes[b].config,
        });
        nodes[a].parent = Some(parent);
        nodes[b].parent = Some(parent);
        let (hi, lo) = if i > j { (i, j) } else { (j, i) };
        lineages.swap_remove(hi);
        lineages[lo] = parent;
    }
}

/// Monte Carlo estimates of `f(x)` for every polymorphic `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchLengthEstimates {
    pub reps: u64,
    index: ConfigIndex,
    estimates: Vec<Estimate>,
}

impl BranchLengthEstimates {
    pub fn get(&self, x: &[usize]) -> Estimate {
        self.estimates[self.index.encode(x)]
    }

    /// `(x, estimate)` for every polymorphic `x`, in odometer order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, Estimate)> + '_ {
        (0..self.index.cells())
            .filter(|&c| self.index.is_polymorphic(c))
            .map(|c| (self.index.decode(c), self.estimates[c]))
    }
}

fn chunks(reps: u64) -> Vec<(u64, u64)> {
    (0..reps.div_ceil(CHUNK))
        .map(|c| (c, CHUNK.min(reps - c * CHUNK)))
        .collect()
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Simulates `reps` genealogies and averages the branch length subtending
/// each `x`. Runs on the current rayon pool.
pub fn simulate_branch_lengths(tree: &DemographyTree, reps: u64, seed: u64) -> BranchLengthEstimates {
    let index = ConfigIndex::new(&tree.sample_sizes());
    let cells = index.cells();
    let per_chunk: Vec<Vec<Moments>> = chunks(reps)
        .into_par_iter()
        .map(|(c, count)| {
            let mut rng = chunk_rng(seed, c);
            let mut sum = vec![0.0; cells];
            let mut sumsq = vec![0.0; cells];
            let mut rep = vec![0.0; cells];
            let mut touched = Vec::new();
            for _ in 0..count {
                let g = simulate_genealogy(tree, &index, &mut rng);
                for (i, node) in g.nodes.iter().enumerate() {
                    let len = g.branch_length(i);
                    if len > 0.0 {
                        if rep[node.config] == 0.0 {
                            touched.push(node.config);
                        }
                        rep[node.config] += len;
                    }
                }
                for &k in &touched {
                    sum[k] += rep[k];
                    sumsq[k] += rep[k] * rep[k];
                    rep[k] = 0.0;
                }
                touched.clear();
            }
            (0..cells)
                .map(|k| Moments::from_sums(count as f64, sum[k], sumsq[k]))
                .collect()
        })
        .collect();
    let mut total = vec![Moments::default(); cells];
    for chunk in per_chunk {
        for (t, m) in total.iter_mut().zip(chunk) {
            *t = t.merge(m);
        }
    }
    BranchLengthEstimates {
        reps,
        index,
        estimates: total.iter().map(Moments::estimate).collect(),
    }
}

/// Empirical law of the number of ancestors at `tau` of `n` lineages.
#[derive(Debug, Clone, PartialEq)]
pub struct AncestorHistogram {
    pub reps: u64,
    /// Entry `m - 1` estimates `P(A_τ = m)`.
    pub probs: Vec<Estimate>,
}

pub fn simulate_ancestor_counts(
    h: &SizeHistory,
    tau: f64,
    n: usize,
    reps: u64,
    seed: u64,
) -> jsfs_core::Result<AncestorHistogram> {
    let r_end = h.integrated_rate(tau)?;
    let counts: Vec<Vec<u64>> = chunks(reps)
        .into_par_iter()
        .map(|(c, count)| {
            let mut rng = chunk_rng(seed, c);
            let mut hist = vec![0u64; n];
            for _ in 0..count {
                let mut m = n;
                let mut r = 0.0;
                while m >= 2 {
                    r += exp1(&mut rng) / (m * (m - 1) / 2) as f64;
                    if r >= r_end {
                        break;
                    }
                    m -= 1;
                }
                hist[m - 1] += 1;
            }
            hist
        })
        .collect();
    let mut hist = vec![0u64; n];
    for c in counts {
        for (h, x) in hist.iter_mut().zip(c) {
            *h += x;
        }
    }
    let r = reps as f64;
    let probs = hist
        .iter()
        .map(|&k| {
            let p = k as f64 / r;
            Estimate {
                mean: p,
                stderr: (p * (1.0 - p) / r).sqrt(),
            }
        })
        .collect();
    Ok(AncestorHistogram { reps, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use jsfs_core::NodeSpec;

    fn two_leaves(t: f64) -> DemographyTree {
        let c = |d: f64| SizeHistory::constant(d, 1.0).unwrap();
        DemographyTree::new(NodeSpec::split(
            "root",
            c(f64::INFINITY),
            vec![NodeSpec::leaf("a", c(t), 1), NodeSpec::leaf("b", c(t), 1)],
        ))
        .unwrap()
    }

    #[test]
    fn moments_merge_matches_direct() {
        let xs = [1.0, 4.0, 2.5, 7.0, 0.5, 3.0];
        let direct = Moments::from_sums(6.0, xs.iter().sum(), xs.iter().map(|x| x * x).sum());
        let a = Moments::from_sums(2.0, 5.0, 17.0);
        let b = Moments::from_sums(4.0, 13.0, 6.25 + 49.0 + 0.25 + 9.0);
        let merged = a.merge(b);
        assert!((merged.mean - direct.mean).abs() < 1e-14);
        assert!((merged.m2 - direct.m2).abs() < 1e-12);
    }

    #[test]
    fn config_index_round_trips() {
        let idx = ConfigIndex::new(&[2, 3, 1]);
        assert_eq!(idx.cells(), 24);
        for c in 0..24 {
            assert_eq!(idx.encode(&idx.decode(c)), c);
        }
        assert!(!idx.is_polymorphic(0));
        assert!(!idx.is_polymorphic(idx.encode(&[2, 3, 1])));
        assert_eq!(idx.unit(0) + idx.unit(1), idx.encode(&[1, 1, 0]));
    }

    #[test]
    fn genealogy_structure() {
        let tree = two_leaves(1.0);
        let idx = ConfigIndex::new(&tree.sample_sizes());
        let mut rng = chunk_rng(7, 0);
        let g = simulate_genealogy(&tree, &idx, &mut rng);
        assert_eq!(g.nodes.len(), 3);
        assert!(g.nodes[g.mrca()].height > 1.0);
        assert_eq!(g.counts(g.mrca()), [1, 1]);
        assert_eq!(g.nodes[0].height, 0.0);
        assert_eq!(g.partition_at(0.5).len(), 2);
        assert_eq!(g.partition_at(g.nodes[2].height + 1.0).len(), 1);
    }

    #[test]
    fn single_population_pair() {
        let tree = DemographyTree::new(NodeSpec::leaf(
            "a",
            SizeHistory::constant(f64::INFINITY, 1.0).unwrap(),
            2,
        ))
        .unwrap();
        let est = simulate_branch_lengths(&tree, 200_000, 3).get(&[1]);
        assert!(est.z_score(2.0).abs() < 4.0, "{est:?}");
    }

    #[test]
    fn two_leaf_singleton() {
        let est = simulate_branch_lengths(&two_leaves(1.0), 200_000, 11).get(&[1, 0]);
        assert!(est.z_score(2.0).abs() < 4.0, "{est:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let tree = two_leaves(0.5);
        assert_eq!(
            simulate_branch_lengths(&tree, 1, 42),
            simulate_branch_lengths(&tree, 1, 42)
        );
        let a = simulate_branch_lengths(&tree, 25_000, 5);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_branch_lengths(&tree, 25_000, 5));
        assert_eq!(a, b);
    }

    #[test]
    fn ancestor_count_examples() {
        let h = SizeHistory::constant(f64::INFINITY, 1.0).unwrap();
        let hist = simulate_ancestor_counts(&h, std::f64::consts::LN_2, 2, 100_000, 1).unwrap();
        assert!(hist.probs[1].z_score(0.5).abs() < 4.0);
        let one = simulate_ancestor_counts(&h, 3.0, 1, 10, 1).unwrap();
        assert_eq!(one.probs[0].mean, 1.0);
        let h0 = SizeHistory::constant(1.0, 1.0).unwrap();
        let zero = simulate_ancestor_counts(&h0, 0.0, 5, 10, 1).unwrap();
        assert_eq!(zero.probs[4].mean, 1.0);
    }
}
