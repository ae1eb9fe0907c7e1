//! Population trees and joint-SFS entries.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result, SizeHistory};

pub type VertexId = usize;

/// Default cap on the number of cells `Π(n_i + 1)` in full-spectrum mode.
pub const DEFAULT_SPECTRUM_CAP: u128 = 1_000_000;

/// A population as written by the user, before validation. Splits may have
/// more than two children; they are expanded into binary splits joined by
/// zero-duration populations.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub history: SizeHistory,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Leaf { sample_size: usize },
    Split { children: Vec<NodeSpec> },
}

impl NodeSpec {
    pub fn leaf(name: impl Into<String>, history: SizeHistory, sample_size: usize) -> Self {
        NodeSpec {
            name: name.into(),
            history,
            kind: NodeKind::Leaf { sample_size },
        }
    }

    pub fn split(name: impl Into<String>, history: SizeHistory, children: Vec<NodeSpec>) -> Self {
        NodeSpec {
            name: name.into(),
            history,
            kind: NodeKind::Split { children },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub name: String,
    pub history: SizeHistory,
    pub parent: Option<VertexId>,
    pub children: Option<[VertexId; 2]>,
    /// Index of the population in entry vectors, for leaves.
    pub leaf_index: Option<usize>,
    /// `n_v`: number of sampled lineages below this vertex.
    pub sample_size: usize,
    /// Leaves below this vertex occupy population indices `lo..hi`.
    pub leaf_range: (usize, usize),
}

impl Vertex {
    /// `τ_v`; infinite for the root.
    pub fn duration(&self) -> f64 {
        self.history.total_duration()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// A validated rooted binary population tree. Leaf populations are numbered
/// in depth-first order, which is the column order of entry vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographyTree {
    vertices: Vec<Vertex>,
    root: VertexId,
    leaves: Vec<VertexId>,
    postorder: Vec<VertexId>,
}

impl DemographyTree {
    pub fn new(root: NodeSpec) -> Result<Self> {
        let mut tree = DemographyTree {
            vertices: Vec::new(),
            root: 0,
            leaves: Vec::new(),
            postorder: Vec::new(),
        };
        tree.root = tree.insert(root, None, "tree")?;
        let mut seen: Vec<&str> = tree.vertices.iter().map(|v| v.name.as_str()).collect();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation("tree", format!("duplicate population name {:?}", w[0])));
        }
        Ok(tree)
    }

    fn insert(&mut self, spec: NodeSpec, parent: Option<VertexId>, path: &str) -> Result<VertexId> {
        let duration = spec.history.total_duration();
        if parent.is_none() && duration.is_finite() {
            return Err(Error::validation(
                format!("{path}.duration"),
                "the root population must have infinite duration",
            ));
        }
        if parent.is_some() && duration.is_infinite() {
            return Err(Error::validation(
                format!("{path}.duration"),
                "only the root population may have infinite duration",
            ));
        }
        let id = self.vertices.len();
        let lo = self.leaves.len();
        self.vertices.push(Vertex {
            name: spec.name.clone(),
            history: spec.history,
            parent,
            children: None,
            leaf_index: None,
            sample_size: 0,
            leaf_range: (lo, lo),
        });
        match spec.kind {
            NodeKind::Leaf { sample_size } => {
                if sample_size == 0 {
                    return Err(Error::validation(
                        format!("{path}.sample_size"),
                        "sample size must be at least 1",
                    ));
                }
                let v = &mut self.vertices[id];
                v.leaf_index = Some(lo);
                v.sample_size = sample_size;
                v.leaf_range = (lo, lo + 1);
                self.leaves.push(id);
            }
            NodeKind::Split { mut children } => {
                if children.len() < 2 {
                    return Err(Error::validation(
                        format!("{path}.children"),
                        "an internal population needs at least two children",
                    ));
                }
                let right = if children.len() == 2 {
                    children.pop().expect("two children")
                } else {
                    // (c0, c1, ..., ck) becomes (c0, [zero-length](c1, ..., ck))
                    let rest = children.split_off(1);
                    NodeSpec::split(format!("{}/{}", spec.name, 1), SizeHistory::empty(), rest)
                };
                let left = children.pop().expect("one child");
                let left = self.insert(left, Some(id), &format!("{path}.children[0]"))?;
                let right = self.insert(right, Some(id), &format!("{path}.children[1]"))?;
                let n = self.vertices[left].sample_size + self.vertices[right].sample_size;
                let v = &mut self.vertices[id];
                v.children = Some([left, right]);
                v.sample_size = n;
                v.leaf_range = (lo, self.leaves.len());
            }
        }
        self.postorder.push(id);
        Ok(id)
    }

    /// Rebuilds the (binary) specification of this tree.
    pub fn to_spec(&self) -> NodeSpec {
        self.spec_of(self.root)
    }

    fn spec_of(&self, id: VertexId) -> NodeSpec {
        let v = &self.vertices[id];
        match v.children {
            None => NodeSpec::leaf(v.name.clone(), v.history.clone(), v.sample_size),
            Some([l, r]) => NodeSpec::split(
                v.name.clone(),
                v.history.clone(),
                alloc::vec![self.spec_of(l), self.spec_of(r)],
            ),
        }
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Children before parents.
    pub fn postorder(&self) -> &[VertexId] {
        &self.postorder
    }

    /// Leaf vertices in population order.
    pub fn leaves(&self) -> &[VertexId] {
        &self.leaves
    }

    /// `D`, the number of sampled populations.
    pub fn num_populations(&self) -> usize {
        self.leaves.len()
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        self.leaves
            .iter()
            .map(|&l| self.vertices[l].sample_size)
            .collect()
    }

    /// Total sample size `n` of the root.
    pub fn total_sample_size(&self) -> usize {
        self.vertices[self.root].sample_size
    }

    pub fn population_names(&self) -> Vec<&str> {
        self.leaves
            .iter()
            .map(|&l| self.vertices[l].name.as_str())
            .collect()
    }

    /// Checks that `x` is a polymorphic derived-allele count vector.
    pub fn validate_entry(&self, x: &[usize]) -> Result<()> {
        self.check_entry(x, "entry")
    }

    fn check_entry(&self, x: &[usize], path: &str) -> Result<()> {
        let sizes = self.sample_sizes();
        if x.len() != sizes.len() {
            return Err(Error::validation(
                path,
                format!("expected {} counts, found {}", sizes.len(), x.len()),
            ));
        }
        if let Some(i) = (0..x.len()).find(|&i| x[i] > sizes[i]) {
            return Err(Error::validation(
                format!("{path}[{i}]"),
                format!("count {} exceeds sample size {}", x[i], sizes[i]),
            ));
        }
        if x.iter().all(|&c| c == 0) || x == sizes.as_slice() {
            return Err(Error::validation(path, "entry is monomorphic"));
        }
        Ok(())
    }

    /// Entry vectors requested by `mode`.
    pub fn enumerate_entries(&self, mode: EntryMode) -> Result<Vec<Vec<usize>>> {
        match mode {
            EntryMode::Explicit(list) => {
                for (i, x) in list.iter().enumerate() {
                    self.check_entry(x, &format!("entries[{i}]"))?;
                }
                Ok(list)
            }
            EntryMode::Full { cap } => {
                let sizes = self.sample_sizes();
                let cells = sizes
                    .iter()
                    .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128 + 1))
                    .unwrap_or(u128::MAX);
                if cells > cap {
                    return Err(Error::TooLarge { size: cells, cap });
                }
                let mut out = Vec::with_capacity(cells as usize - 2);
                let mut x = alloc::vec![0usize; sizes.len()];
                loop {
                    if x.iter().any(|&c| c != 0) && x != sizes {
                        out.push(x.clone());
                    }
                    // odometer, last population fastest
                    let mut i = sizes.len();
                    loop {
                        if i == 0 {
                            return Ok(out);
                        }
                        i -= 1;
                        if x[i] < sizes[i] {
                            x[i] += 1;
                            break;
                        }
                        x[i] = 0;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntryMode {
    Explicit(Vec<Vec<usize>>),
    Full { cap: u128 },
}

impl EntryMode {
    pub fn full() -> Self {
        EntryMode::Full {
            cap: DEFAULT_SPECTRUM_CAP,
        }
    }
}

/// A derived-allele count vector with its expected branch length.
#[derive(Debug, Clone, PartialEq)]
pub struct SfsEntry {
    pub x: Vec<usize>,
    pub value: f64,
}

impl core::fmt::Display for SfsEntry {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let counts: Vec<String> = self.x.iter().map(|c| c.to_string()).collect();
        write!(f, "({}) -> {}", counts.join(", "), self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn constant(d: f64) -> SizeHistory {
        SizeHistory::constant(d, 1.0).unwrap()
    }

    fn two_leaf(t: f64, n: (usize, usize)) -> DemographyTree {
        DemographyTree::new(NodeSpec::split(
            "root",
            constant(f64::INFINITY),
            vec![
                NodeSpec::leaf("a", constant(t), n.0),
                NodeSpec::leaf("b", constant(t), n.1),
            ],
        ))
        .unwrap()
    }

    #[test]
    fn two_leaf_tree() {
        let tree = two_leaf(1.0, (1, 1));
        assert_eq!(tree.vertices().len(), 3);
        assert_eq!(tree.total_sample_size(), 2);
        assert_eq!(tree.num_populations(), 2);
        assert_eq!(tree.population_names(), ["a", "b"]);
        assert_eq!(*tree.postorder().last().unwrap(), tree.root());
    }

    #[test]
    fn zero_sample_size_rejected() {
        let err = DemographyTree::new(NodeSpec::split(
            "root",
            constant(f64::INFINITY),
            vec![
                NodeSpec::leaf("a", constant(1.0), 0),
                NodeSpec::leaf("b", constant(1.0), 1),
            ],
        ))
        .unwrap_err();
        assert_eq!(
            err,
            Error::validation("tree.children[0].sample_size", "sample size must be at least 1")
        );
    }

    #[test]
    fn root_and_branch_durations() {
        let err = DemographyTree::new(NodeSpec::leaf("r", constant(1.0), 2)).unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "tree.duration"));
        let err = DemographyTree::new(NodeSpec::split(
            "root",
            constant(f64::INFINITY),
            vec![
                NodeSpec::leaf("a", constant(f64::INFINITY), 1),
                NodeSpec::leaf("b", constant(1.0), 1),
            ],
        ))
        .unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "tree.children[0].duration"));
    }

    #[test]
    fn ternary_split_is_expanded() {
        let tree = DemographyTree::new(NodeSpec::split(
            "root",
            constant(f64::INFINITY),
            vec![
                NodeSpec::leaf("a", constant(1.0), 1),
                NodeSpec::leaf("b", constant(1.0), 2),
                NodeSpec::leaf("c", constant(1.0), 3),
            ],
        ))
        .unwrap();
        assert_eq!(tree.vertices().len(), 5);
        assert_eq!(tree.sample_sizes(), [1, 2, 3]);
        let [_, right] = tree.vertex(tree.root()).children.unwrap();
        let joint = tree.vertex(right);
        assert_eq!(joint.duration(), 0.0);
        assert_eq!(joint.sample_size, 5);
        assert_eq!(joint.leaf_range, (1, 3));
        // round trip through the binary specification
        assert_eq!(DemographyTree::new(tree.to_spec()).unwrap(), tree);
    }

    #[test]
    fn single_child_rejected() {
        let err = DemographyTree::new(NodeSpec::split(
            "root",
            constant(f64::INFINITY),
            vec![NodeSpec::leaf("a", constant(1.0), 1)],
        ))
        .unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "tree.children"));
    }

    #[test]
    fn sample_sizes_sum_up_the_tree() {
        let tree = two_leaf(0.5, (3, 4));
        for v in tree.vertices() {
            if let Some([l, r]) = v.children {
                assert_eq!(v.sample_size, tree.vertex(l).sample_size + tree.vertex(r).sample_size);
            }
        }
    }

    #[test]
    fn full_enumeration() {
        let tree = two_leaf(1.0, (1, 1));
        let all = tree.enumerate_entries(EntryMode::full()).unwrap();
        assert_eq!(all, vec![vec![0, 1], vec![1, 0]]);

        let tree = two_leaf(1.0, (2, 1));
        let all = tree.enumerate_entries(EntryMode::full()).unwrap();
        assert_eq!(all.len(), 4);

        let err = tree.enumerate_entries(EntryMode::Full { cap: 5 }).unwrap_err();
        assert_eq!(err, Error::TooLarge { size: 6, cap: 5 });
    }

    #[test]
    fn explicit_entries_validated() {
        let tree = two_leaf(1.0, (2, 1));
        assert!(tree.enumerate_entries(EntryMode::Explicit(vec![vec![1, 0]])).is_ok());
        let err = tree
            .enumerate_entries(EntryMode::Explicit(vec![vec![1, 0], vec![0, 0]]))
            .unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "entries[1]"));
        assert!(tree.validate_entry(&[2, 1]).is_err());
        assert!(tree.validate_entry(&[3, 0]).is_err());
        assert!(tree.validate_entry(&[1]).is_err());
    }
}
