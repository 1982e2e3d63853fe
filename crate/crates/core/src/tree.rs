//! Binary dimension trees over contiguous mode ranges.

use crate::error::{HtError, Result};
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeShape {
    #[default]
    Balanced,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub lo: usize,
    pub hi: usize,
    pub parent: Option<usize>,
    pub children: Option<(usize, usize)>,
    pub depth: usize,
}

/// Dimension tree with nodes stored in breadth-first order (root = 0).
///
/// Every node covers a contiguous range of modes, so a child pair always
/// splits its parent into a left and right block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionTree {
    m: usize,
    shape: TreeShape,
    nodes: Vec<TreeNode>,
    leaf_of_mode: Vec<usize>,
}

impl DimensionTree {
    pub fn new(m: usize, shape: TreeShape) -> Result<Self> {
        if m < 2 {
            return Err(HtError::TooFewModes(m));
        }
        let mut nodes = vec![TreeNode { lo: 0, hi: m, parent: None, children: None, depth: 0 }];
        let mut next = 0;
        while next < nodes.len() {
            let (lo, hi, depth) = (nodes[next].lo, nodes[next].hi, nodes[next].depth);
            if hi - lo > 1 {
                let mid = match shape {
                    TreeShape::Balanced => lo + (hi - lo).div_ceil(2),
                    TreeShape::Linear => lo + 1,
                };
                let c1 = nodes.len();
                nodes.push(TreeNode { lo, hi: mid, parent: Some(next), children: None, depth: depth + 1 });
                nodes.push(TreeNode { lo: mid, hi, parent: Some(next), children: None, depth: depth + 1 });
                nodes[next].children = Some((c1, c1 + 1));
            }
            next += 1;
        }
        let mut leaf_of_mode = vec![0; m];
        for (id, n) in nodes.iter().enumerate() {
            if n.hi - n.lo == 1 {
                leaf_of_mode[n.lo] = id;
            }
        }
        Ok(DimensionTree { m, shape, nodes, leaf_of_mode })
    }

    pub fn balanced(m: usize) -> Result<Self> {
        Self::new(m, TreeShape::Balanced)
    }

    pub fn linear(m: usize) -> Result<Self> {
        Self::new(m, TreeShape::Linear)
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn modes(&self, id: usize) -> Range<usize> {
        self.nodes[id].lo..self.nodes[id].hi
    }

    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        self.nodes[id].children
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_none()
    }

    /// Mode index of a leaf node.
    pub fn leaf_mode(&self, id: usize) -> Option<usize> {
        self.is_leaf(id).then_some(self.nodes[id].lo)
    }

    pub fn leaf(&self, mode: usize) -> usize {
        self.leaf_of_mode[mode]
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| !self.is_leaf(i))
    }

    /// Mode sets using 1-based labels, in node order.
    pub fn node_sets(&self) -> Vec<Vec<usize>> {
        self.nodes.iter().map(|n| (n.lo + 1..n.hi + 1).collect()).collect()
    }
}
