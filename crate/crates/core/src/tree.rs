//! Balanced b-ary label tree with a leaf-to-target bijection.
//!
//! Nodes are numbered breadth-first starting from the root (id 0). Each level
//! is filled left to right, so the nodes of a level, the children of a node
//! and the leaves below a node all occupy contiguous id ranges.

use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

pub type NodeId = usize;
pub type TargetId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    arity: usize,
    height: usize,
    num_targets: usize,
    seed: Option<u64>,
    /// `level_offsets[h]..level_offsets[h + 1]` are the ids at level `h`.
    level_offsets: Vec<NodeId>,
    level: Vec<usize>,
    parent: Vec<Option<NodeId>>,
    first_child: Vec<NodeId>,
    child_count: Vec<usize>,
    leaf_to_target: Vec<TargetId>,
    target_to_leaf: Vec<NodeId>,
}

/// On-disk form of a tree. The shape is a pure function of
/// `(num_targets, arity)` and is rebuilt on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeFile {
    pub arity: usize,
    pub height: usize,
    pub num_targets: usize,
    pub leaf_to_target: Vec<TargetId>,
    pub seed: Option<u64>,
}

/// Smallest `h >= 1` with `arity^h >= num_targets`.
pub fn tree_height(num_targets: usize, arity: usize) -> usize {
    let mut height = 1;
    let mut capacity = arity;
    while capacity < num_targets {
        capacity = capacity.saturating_mul(arity);
        height += 1;
    }
    height
}

impl Tree {
    /// Builds the balanced shape and attaches a seeded random permutation of
    /// the targets to its leaves.
    pub fn random(num_targets: usize, arity: usize, seed: u64) -> Result<Self> {
        check_shape_args(num_targets, arity)?;
        let mut order: Vec<TargetId> = (0..num_targets).collect();
        order.shuffle(&mut rng::stream(seed, "tree"));
        let mut tree = Self::with_leaf_order(num_targets, arity, order)?;
        tree.seed = Some(seed);
        Ok(tree)
    }

    /// Builds the balanced shape with leaf `i` (left to right) holding
    /// target `leaf_to_target[i]`.
    pub fn with_leaf_order(
        num_targets: usize,
        arity: usize,
        leaf_to_target: Vec<TargetId>,
    ) -> Result<Self> {
        check_shape_args(num_targets, arity)?;
        if leaf_to_target.len() != num_targets {
            return invalid(format!(
                "leaf_to_target has {} entries, expected {num_targets}",
                leaf_to_target.len()
            ));
        }
        let mut target_to_leaf_pos = vec![usize::MAX; num_targets];
        for (pos, &target) in leaf_to_target.iter().enumerate() {
            if target >= num_targets || target_to_leaf_pos[target] != usize::MAX {
                return invalid("leaf_to_target is not a permutation of the targets");
            }
            target_to_leaf_pos[target] = pos;
        }

        let height = tree_height(num_targets, arity);
        let mut sizes = vec![0usize; height + 1];
        sizes[height] = num_targets;
        for h in (0..height).rev() {
            sizes[h] = sizes[h + 1].div_ceil(arity);
        }
        debug_assert_eq!(sizes[0], 1);

        let mut level_offsets = Vec::with_capacity(height + 2);
        level_offsets.push(0);
        for &size in &sizes {
            level_offsets.push(level_offsets.last().unwrap() + size);
        }
        let num_nodes = level_offsets[height + 1];

        let mut level = vec![0; num_nodes];
        let mut parent = vec![None; num_nodes];
        let mut first_child = vec![0; num_nodes];
        let mut child_count = vec![0; num_nodes];
        for h in 0..=height {
            for pos in 0..sizes[h] {
                let id = level_offsets[h] + pos;
                level[id] = h;
                if h < height {
                    let start = pos * arity;
                    let end = ((pos + 1) * arity).min(sizes[h + 1]);
                    first_child[id] = level_offsets[h + 1] + start;
                    child_count[id] = end - start;
                    for child in first_child[id]..first_child[id] + child_count[id] {
                        parent[child] = Some(id);
                    }
                }
            }
        }

        let leaf_base = level_offsets[height];
        let target_to_leaf = target_to_leaf_pos.iter().map(|p| leaf_base + p).collect();

        Ok(Self {
            arity,
            height,
            num_targets,
            seed: None,
            level_offsets,
            level,
            parent,
            first_child,
            child_count,
            leaf_to_target,
            target_to_leaf,
        })
    }

    pub fn from_file(file: TreeFile) -> Result<Self> {
        let expected = tree_height(file.num_targets.max(1), file.arity.max(2));
        let mut tree = Self::with_leaf_order(file.num_targets, file.arity, file.leaf_to_target)?;
        if file.height != expected {
            return Err(Error::Data(format!(
                "tree height {} does not match {expected} implied by M and b",
                file.height
            )));
        }
        tree.seed = file.seed;
        Ok(tree)
    }

    pub fn to_file(&self) -> TreeFile {
        TreeFile {
            arity: self.arity,
            height: self.height,
            num_targets: self.num_targets,
            leaf_to_target: self.leaf_to_target.clone(),
            seed: self.seed,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    pub fn num_nodes(&self) -> usize {
        self.level.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn contains(&self, n: NodeId) -> bool {
        n < self.num_nodes()
    }

    fn check(&self, n: NodeId) -> Result<()> {
        if self.contains(n) {
            Ok(())
        } else {
            invalid(format!("unknown node id {n}"))
        }
    }

    /// Level of `n`. Panics on an unknown id.
    pub fn level(&self, n: NodeId) -> usize {
        self.level[n]
    }

    /// Ids of `N_h`.
    pub fn level_nodes(&self, h: usize) -> Range<NodeId> {
        self.level_offsets[h]..self.level_offsets[h + 1]
    }

    pub fn leaves(&self) -> Range<NodeId> {
        self.level_nodes(self.height)
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.level[n] == self.height
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.parent[n]
    }

    /// Children of `n`, empty for a leaf.
    pub fn children(&self, n: NodeId) -> Range<NodeId> {
        self.first_child[n]..self.first_child[n] + self.child_count[n]
    }

    /// Ancestors of `n` from level 1 down to `n` itself; the root is excluded.
    pub fn path_to_root(&self, n: NodeId) -> Result<Vec<NodeId>> {
        self.check(n)?;
        let mut path = Vec::with_capacity(self.level[n]);
        let mut cur = n;
        while let Some(p) = self.parent[cur] {
            path.push(cur);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Leaves in the subtree of `n` as a contiguous id range.
    pub fn subtree_leaves(&self, n: NodeId) -> Result<Range<NodeId>> {
        self.check(n)?;
        let (mut lo, mut hi) = (n, n);
        while !self.is_leaf(lo) {
            lo = self.first_child[lo];
            hi = self.first_child[hi] + self.child_count[hi] - 1;
        }
        Ok(lo..hi + 1)
    }

    pub fn ancestor_at_level(&self, n: NodeId, h: usize) -> Result<NodeId> {
        self.check(n)?;
        if h > self.level[n] {
            return invalid(format!(
                "level {h} is below node {n} at level {}",
                self.level[n]
            ));
        }
        let mut cur = n;
        for _ in h..self.level[n] {
            cur = self.parent[cur].expect("non-root node has a parent");
        }
        Ok(cur)
    }

    /// `π(n)` for a leaf.
    pub fn target_of_leaf(&self, leaf: NodeId) -> Result<TargetId> {
        if !self.contains(leaf) || !self.is_leaf(leaf) {
            return invalid(format!("node {leaf} is not a leaf"));
        }
        Ok(self.leaf_to_target[leaf - self.level_offsets[self.height]])
    }

    /// `π⁻¹(j)`.
    pub fn leaf_of_target(&self, target: TargetId) -> Result<NodeId> {
        match self.target_to_leaf.get(target) {
            Some(&leaf) => Ok(leaf),
            None => invalid(format!(
                "target {target} out of range for {} targets",
                self.num_targets
            )),
        }
    }

    /// Leaf-position-indexed `π`.
    pub fn leaf_to_target(&self) -> &[TargetId] {
        &self.leaf_to_target
    }

    pub(crate) fn leaf_target_unchecked(&self, leaf: NodeId) -> TargetId {
        self.leaf_to_target[leaf - self.level_offsets[self.height]]
    }

    pub(crate) fn target_leaf_unchecked(&self, target: TargetId) -> NodeId {
        self.target_to_leaf[target]
    }
}

fn check_shape_args(num_targets: usize, arity: usize) -> Result<()> {
    if arity < 2 {
        return invalid(format!("arity must be at least 2, got {arity}"));
    }
    if num_targets < 1 {
        return invalid("a tree needs at least one target");
    }
    Ok(())
}
