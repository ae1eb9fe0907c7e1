//! Joint SFS entries by peeling the population tree.
//!
//! Going forward in time, the number of derived copies among the `n_v`
//! lineages of population `v` follows a Moran model. For an entry `x`,
//! `ℓ^v_t(k) = P(x_v | k derived lineages at time t above the bottom of v)`
//! is computed leaves-to-root: indicators at the leaves, `exp(sQ)` along each
//! population, a hypergeometric merge at each split. A mutation arising in
//! `v` contributes `Σ_k f^v(k) ℓ^v_0(k)`, where `f^v` is the truncated SFS of
//! `v`, provided no leaf outside `v` carries the derived allele.

mod convolve;
mod generator;
mod propagate;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

pub use convolve::{ConvolutionMethod, Convolver, WEIGHT_CUTOFF};
pub use generator::MoranRateMatrix;
pub use propagate::{ActionMethod, Propagator, SPECTRAL_CUTOFF};

use crate::demography::{DemographyTree, SfsEntry, VertexId};
use crate::math::LnFactorials;
use crate::truncated_sfs::{close_row, sfs_top, WeightTable};
use crate::{Error, Result};

/// Round-off allowed outside `[0, 1]` before a likelihood is rejected.
pub const LIKELIHOOD_TOLERANCE: f64 = 1e-12;

/// Default `n_v` above which splits use the FFT path. The stable FFT needs
/// `O(√n)` transforms per split and measured slower than the direct path at
/// every size up to 4096, so by default it is never chosen.
pub const DEFAULT_FFT_THRESHOLD: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    /// `t = 0`, the recent end of the population.
    Bottom,
    /// `t = τ_v`, just below the parent's split.
    Top,
}

/// `ℓ^v_t(k)` for `k = 0..=n_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodVector {
    pub owner: VertexId,
    pub position: Position,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    pub action: ActionMethod,
    pub convolution: ConvolutionMethod,
    pub fft_threshold: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            action: ActionMethod::Auto,
            convolution: ConvolutionMethod::Auto,
            fft_threshold: DEFAULT_FFT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
struct VertexData {
    /// `f^v(k)` for `k = 1..=n_v`, or `k = 1..n` at the root.
    sfs: Vec<f64>,
    propagator: Option<Propagator>,
    convolver: Option<Convolver>,
}

/// A population tree with every entry-independent quantity precomputed.
/// Evaluation borrows the engine immutably, so entries may be evaluated
/// concurrently.
#[derive(Debug, Clone)]
pub struct Engine {
    tree: DemographyTree,
    data: Vec<VertexData>,
}

impl Engine {
    pub fn new(tree: &DemographyTree) -> Result<Self> {
        Self::with_options(tree, EngineOptions::default())
    }

    pub fn with_options(tree: &DemographyTree, options: EngineOptions) -> Result<Self> {
        let lnf = LnFactorials::new(tree.total_sample_size());
        let mut weights: BTreeMap<usize, WeightTable> = BTreeMap::new();
        let mut data = Vec::with_capacity(tree.vertices().len());
        for (id, v) in tree.vertices().iter().enumerate() {
            let n = v.sample_size;
            let tau = v.duration();
            let is_root = id == tree.root();
            let mut sfs = if tau == 0.0 {
                vec![0.0; n]
            } else if n == 1 {
                vec![tau]
            } else {
                if let alloc::collections::btree_map::Entry::Vacant(e) = weights.entry(n) {
                    e.insert(WeightTable::build(n)?);
                }
                let partial = sfs_top(&weights[&n], &v.history, tau)?;
                if is_root {
                    partial
                } else {
                    close_row(&partial, tau, n)?
                }
            };
            if is_root {
                sfs.truncate(n.saturating_sub(1));
            }
            let propagator = (!is_root).then(|| {
                let s = v.history.integrated_rate(tau).unwrap_or(0.0);
                Propagator::new(n, s, options.action)
            });
            let convolver = v.children.map(|[a, b]| {
                Convolver::new(
                    tree.vertex(a).sample_size,
                    tree.vertex(b).sample_size,
                    options.convolution,
                    options.fft_threshold,
                    &lnf,
                )
            });
            data.push(VertexData {
                sfs,
                propagator,
                convolver,
            });
        }
        Ok(Engine {
            tree: tree.clone(),
            data,
        })
    }

    pub fn tree(&self) -> &DemographyTree {
        &self.tree
    }

    /// Cached truncated SFS of vertex `v`: `k = 1..=n_v`, except at the root
    /// where it stops at `n - 1`.
    pub fn vertex_sfs(&self, v: VertexId) -> &[f64] {
        &self.data[v].sfs
    }

    pub fn propagator(&self, v: VertexId) -> Option<&Propagator> {
        self.data[v].propagator.as_ref()
    }

    pub fn convolver(&self, v: VertexId) -> Option<&Convolver> {
        self.data[v].convolver.as_ref()
    }

    /// Indicator vector at `x_i` for the bottom of leaf `leaf`.
    pub fn leaf_init(&self, leaf: VertexId, x_i: usize) -> Result<LikelihoodVector> {
        let v = self.tree.vertex(leaf);
        if !v.is_leaf() {
            return Err(Error::domain("leaf_init called on an internal vertex"));
        }
        if x_i > v.sample_size {
            return Err(Error::Domain(alloc::format!(
                "derived count {x_i} exceeds sample size {}",
                v.sample_size
            )));
        }
        Ok(LikelihoodVector {
            owner: leaf,
            position: Position::Bottom,
            values: indicator(v.sample_size, x_i),
        })
    }

    /// `exp(sQ) ℓ` from the bottom to the top of a non-root vertex.
    pub fn propagate_up(&self, ell: &LikelihoodVector) -> Result<LikelihoodVector> {
        let p = self.data[ell.owner]
            .propagator
            .as_ref()
            .ok_or_else(|| Error::domain("the root has no top"))?;
        if ell.position != Position::Bottom {
            return Err(Error::domain("propagate_up expects a bottom vector"));
        }
        let mut values = p.apply(&ell.values);
        check_likelihood(&mut values, "propagate_up")?;
        Ok(LikelihoodVector {
            owner: ell.owner,
            position: Position::Top,
            values,
        })
    }

    /// Bottom vector of split `v` from the top vectors of its two children.
    pub fn convolve_split(
        &self,
        v: VertexId,
        first: &LikelihoodVector,
        second: &LikelihoodVector,
    ) -> Result<LikelihoodVector> {
        let c = self.data[v]
            .convolver
            .as_ref()
            .ok_or_else(|| Error::domain("convolve_split called on a leaf"))?;
        let children = self.tree.vertex(v).children.expect("split has children");
        if [first.owner, second.owner] != children
            || first.position != Position::Top
            || second.position != Position::Top
        {
            return Err(Error::domain("convolve_split expects the children's top vectors in order"));
        }
        let mut values = c.apply(&first.values, &second.values);
        check_likelihood(&mut values, "convolve_split")?;
        Ok(LikelihoodVector {
            owner: v,
            position: Position::Bottom,
            values,
        })
    }

    /// `f(x)` for one polymorphic entry.
    pub fn evaluate(&self, x: &[usize]) -> Result<f64> {
        self.tree.validate_entry(x)?;
        let total_derived: usize = x.iter().sum();
        let mut tops: Vec<Vec<f64>> = vec![Vec::new(); self.data.len()];
        let mut value = 0.0;
        for &id in self.tree.postorder() {
            let v = self.tree.vertex(id);
            let n = v.sample_size;
            let (lo, hi) = v.leaf_range;
            let derived: usize = x[lo..hi].iter().sum();
            let bottom = if let Some([a, b]) = v.children {
                let c = self.data[id].convolver.as_ref().expect("split has a convolver");
                let mut out = c.apply(&tops[a], &tops[b]);
                check_likelihood(&mut out, "convolve_split")?;
                tops[a] = Vec::new();
                tops[b] = Vec::new();
                out
            } else {
                indicator(n, derived)
            };
            if derived == total_derived {
                let sfs = &self.data[id].sfs;
                value += sfs.iter().zip(&bottom[1..]).map(|(f, l)| f * l).sum::<f64>();
            }
            if let Some(p) = &self.data[id].propagator {
                let mut top = p.apply(&bottom);
                check_likelihood(&mut top, "propagate_up")?;
                tops[id] = top;
            }
        }
        Ok(value)
    }

    /// Evaluates every entry in order.
    pub fn joint_sfs(&self, entries: &[Vec<usize>]) -> Result<Vec<SfsEntry>> {
        entries
            .iter()
            .map(|x| {
                Ok(SfsEntry {
                    x: x.clone(),
                    value: self.evaluate(x)?,
                })
            })
            .collect()
    }
}

fn indicator(n: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    v[at] = 1.0;
    v
}

fn check_likelihood(values: &mut [f64], context: &'static str) -> Result<()> {
    for x in values.iter_mut() {
        if !(-LIKELIHOOD_TOLERANCE..=1.0 + LIKELIHOOD_TOLERANCE).contains(x) {
            return Err(Error::NumericalInstability { context, value: *x });
        }
        *x = x.clamp(0.0, 1.0);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demography::NodeSpec;
    use crate::SizeHistory;

    fn two_leaf(t: f64, n1: usize, n2: usize) -> DemographyTree {
        let root = NodeSpec::split(
            "root",
            SizeHistory::constant(f64::INFINITY, 1.0).unwrap(),
            vec![
                NodeSpec::leaf("a", SizeHistory::constant(t, 1.0).unwrap(), n1),
                NodeSpec::leaf("b", SizeHistory::constant(t, 1.0).unwrap(), n2),
            ],
        );
        DemographyTree::new(root).unwrap()
    }

    #[test]
    fn two_leaf_singleton() {
        for t in [0.1, 1.0, 3.5] {
            let engine = Engine::new(&two_leaf(t, 1, 1)).unwrap();
            let f = engine.evaluate(&[1, 0]).unwrap();
            assert!((f - (t + 1.0)).abs() < 1e-12, "{f}");
            let g = engine.evaluate(&[0, 1]).unwrap();
            assert_eq!(f, g);
        }
    }

    #[test]
    fn leaf_and_root_rows() {
        let engine = Engine::new(&two_leaf(2.5, 1, 1)).unwrap();
        let tree = engine.tree();
        let leaf = tree.leaves()[0];
        assert_eq!(engine.vertex_sfs(leaf), &[2.5]);
        let root = engine.vertex_sfs(tree.root());
        assert_eq!(root.len(), 1);
        assert!((root[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_population_matches_truncated_sfs() {
        let h = SizeHistory::constant(f64::INFINITY, 1.0).unwrap();
        let tree = DemographyTree::new(NodeSpec::leaf("a", h.clone(), 12)).unwrap();
        let engine = Engine::new(&tree).unwrap();
        let row = crate::truncated_sfs::top_row(&h, f64::INFINITY, 12).unwrap();
        for k in 1..12 {
            assert_eq!(engine.evaluate(&[k]).unwrap(), row[k - 1]);
        }
    }

    #[test]
    fn leaf_init_examples() {
        let engine = Engine::new(&two_leaf(1.0, 3, 2)).unwrap();
        let leaves = engine.tree().leaves().to_vec();
        assert_eq!(engine.leaf_init(leaves[0], 0).unwrap().values, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(engine.leaf_init(leaves[1], 1).unwrap().values, [0.0, 1.0, 0.0]);
        assert!(engine.leaf_init(leaves[1], 3).is_err());
    }

    #[test]
    fn step_by_step_matches_evaluate() {
        let engine = Engine::new(&two_leaf(0.7, 3, 2)).unwrap();
        let tree = engine.tree();
        let [a, b] = [tree.leaves()[0], tree.leaves()[1]];
        let x = [2usize, 1usize];
        let ta = engine.propagate_up(&engine.leaf_init(a, x[0]).unwrap()).unwrap();
        let tb = engine.propagate_up(&engine.leaf_init(b, x[1]).unwrap()).unwrap();
        let root = engine.convolve_split(tree.root(), &ta, &tb).unwrap();
        let f: f64 = engine
            .vertex_sfs(tree.root())
            .iter()
            .zip(&root.values[1..])
            .map(|(f, l)| f * l)
            .sum();
        assert!((f - engine.evaluate(&x).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn rejects_out_of_range_likelihood() {
        let mut v = [0.5, 1.0 + 1e-13, -1e-13];
        check_likelihood(&mut v, "test").unwrap();
        assert_eq!(v, [0.5, 1.0, 0.0]);
        assert!(check_likelihood(&mut [1.0 + 1e-9], "test").is_err());
    }

    #[test]
    fn engine_is_sync() {
        fn assert_sync<T: Sync + Send>() {}
        assert_sync::<Engine>();
    }
}
