use serde::{Deserialize, Serialize};

/// One node of a binary regression tree. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node<L> {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: L,
        n_samples: usize,
    },
}

/// Regression tree stored as a preorder node array; `nodes[0]` is the root
/// and an internal node's left child always directly follows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L: Clone> Tree<L> {
    pub fn leaf(value: L, n_samples: usize) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value, n_samples }],
        }
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> &L {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { value, .. } => value,
            Node::Internal { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk<L>(nodes: &[Node<L>], i: usize) -> usize {
            match &nodes[i] {
                Node::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Features tested by at least one internal node.
    pub fn features_used(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    /// Rewrites an arbitrary arena (root at 0) into preorder.
    pub(crate) fn into_preorder(self) -> Tree<L> {
        let mut out = Vec::with_capacity(self.nodes.len());
        fn visit<L: Clone>(src: &[Node<L>], i: usize, out: &mut Vec<Node<L>>) -> usize {
            let at = out.len();
            match &src[i] {
                Node::Leaf { .. } => out.push(src[i].clone()),
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.push(Node::Internal {
                        feature: *feature,
                        threshold: *threshold,
                        left: 0,
                        right: 0,
                    });
                    let l = visit(src, *left, out);
                    let r = visit(src, *right, out);
                    if let Node::Internal { left, right, .. } = &mut out[at] {
                        *left = l;
                        *right = r;
                    }
                }
            }
            at
        }
        visit(&self.nodes, 0, &mut out);
        Tree { nodes: out }
    }

    /// Checks child indices: in range, preorder, every node reachable exactly once.
    pub(crate) fn check_structure(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut next = 0usize;
        fn visit<L>(nodes: &[Node<L>], i: usize, next: &mut usize, depth: usize) -> Result<(), String> {
            if i != *next || i >= nodes.len() || depth > nodes.len() {
                return Err(format!("node {i} is not in preorder position"));
            }
            *next += 1;
            if let Node::Internal { left, right, .. } = &nodes[i] {
                visit(nodes, *left, next, depth + 1)?;
                visit(nodes, *right, next, depth + 1)?;
            }
            Ok(())
        }
        visit(&self.nodes, 0, &mut next, 0)?;
        if next != self.nodes.len() {
            return Err("tree has unreachable nodes".into());
        }
        Ok(())
    }
}
