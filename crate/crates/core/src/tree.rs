//! Finite rooted trees with connectivity types and vertex/edge weights.

use crate::error::{Error, Result};

/// One node. Parents always precede their children in the node vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub level: usize,
    /// Connectivity type `W`.
    pub w_type: f64,
    pub vertex_weight: f64,
    /// Weight of the edge to the parent; zero at the root.
    pub edge_weight: f64,
    /// Graph vertex this node was matched to, if any.
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootedWeightedTree {
    nodes: Vec<TreeNode>,
}

/// AHU-style canonical form. Equal codes iff the trees are isomorphic as
/// rooted trees with bit-identical weights.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalCode(Vec<u8>);

impl CanonicalCode {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

/// Which node fields enter a canonical code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeFields {
    pub types: bool,
    pub weights: bool,
}

impl CodeFields {
    pub const ALL: CodeFields = CodeFields { types: true, weights: true };
    pub const MARKS: CodeFields = CodeFields { types: false, weights: true };
    pub const TYPES: CodeFields = CodeFields { types: true, weights: false };
    pub const SHAPE: CodeFields = CodeFields { types: false, weights: false };
}

impl RootedWeightedTree {
    pub fn root(w_type: f64, vertex_weight: f64) -> Self {
        RootedWeightedTree {
            nodes: vec![TreeNode {
                parent: None,
                children: Vec::new(),
                level: 0,
                w_type,
                vertex_weight,
                edge_weight: 0.0,
                label: None,
            }],
        }
    }

    /// Appends a child as the last sibling of `parent`; returns its index.
    pub fn add_child(&mut self, parent: usize, w_type: f64, vertex_weight: f64, edge_weight: f64) -> usize {
        let id = self.nodes.len();
        let level = self.nodes[parent].level + 1;
        self.nodes.push(TreeNode {
            parent: Some(parent),
            children: Vec::new(),
            level,
            w_type,
            vertex_weight,
            edge_weight,
            label: None,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut TreeNode {
        &mut self.nodes[i]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.nodes[i].children
    }

    pub fn root_degree(&self) -> usize {
        self.nodes[0].children.len()
    }

    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Number of nodes on each level.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.height() + 1];
        for n in &self.nodes {
            out[n.level] += 1;
        }
        out
    }

    /// Ulam-Harris address of node `i` (1-based child indices).
    pub fn address(&self, mut i: usize) -> Vec<u32> {
        let mut out = Vec::new();
        while let Some(p) = self.nodes[i].parent {
            let j = self.nodes[p].children.iter().position(|c| *c == i).expect("child of parent");
            out.push(j as u32 + 1);
            i = p;
        }
        out.reverse();
        out
    }

    /// Copy restricted to levels `0..=depth`.
    pub fn truncate(&self, depth: usize) -> RootedWeightedTree {
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut out = RootedWeightedTree { nodes: Vec::with_capacity(self.nodes.len()) };
        for (i, n) in self.nodes.iter().enumerate() {
            if n.level > depth {
                continue;
            }
            let id = out.nodes.len();
            map[i] = id;
            let parent = n.parent.map(|p| map[p]);
            if let Some(p) = parent {
                out.nodes[p].children.push(id);
            }
            out.nodes.push(TreeNode { parent, children: Vec::new(), ..n.clone() });
        }
        out
    }

    /// Copies the subtree rooted at `src` of `other` under `parent`, with the
    /// connecting edge weight taken from `other`'s node.
    pub fn attach_subtree(&mut self, parent: usize, other: &RootedWeightedTree, src: usize) -> usize {
        let mut stack = vec![(src, parent)];
        let mut first = usize::MAX;
        while let Some((s, p)) = stack.pop() {
            let n = &other.nodes[s];
            let id = self.add_child(p, n.w_type, n.vertex_weight, n.edge_weight);
            self.nodes[id].label = n.label;
            if first == usize::MAX {
                first = id;
            }
            for c in n.children.iter().rev() {
                stack.push((*c, id));
            }
        }
        first
    }

    pub fn canonical_code(&self) -> CanonicalCode {
        self.code_with(CodeFields::ALL)
    }

    pub fn code_with(&self, fields: CodeFields) -> CanonicalCode {
        let mut codes: Vec<Vec<u8>> = vec![Vec::new(); self.nodes.len()];
        for i in (0..self.nodes.len()).rev() {
            let n = &self.nodes[i];
            let mut kids: Vec<Vec<u8>> = n
                .children
                .iter()
                .map(|c| {
                    let mut k = Vec::new();
                    if fields.weights {
                        k.extend_from_slice(&self.nodes[*c].edge_weight.to_bits().to_be_bytes());
                    }
                    k.append(&mut codes[*c]);
                    k
                })
                .collect();
            kids.sort_unstable();
            let mut code = vec![b'('];
            if fields.types {
                code.extend_from_slice(&n.w_type.to_bits().to_be_bytes());
            }
            if fields.weights {
                code.extend_from_slice(&n.vertex_weight.to_bits().to_be_bytes());
            }
            for k in kids {
                code.extend_from_slice(&k);
            }
            code.push(b')');
            codes[i] = code;
        }
        CanonicalCode(std::mem::take(&mut codes[0]))
    }

    /// Edge list text `parent child edge_weight`, one line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                s.push_str(&format!("{p} {i} {}\n", n.edge_weight));
            }
        }
        s
    }
}

/// Attaches `t2` to the root of `t` by an edge of weight `w`. `t` must have
/// height at most `depth` and `t2` at most `depth - 1`.
pub fn graft(t: &RootedWeightedTree, t2: &RootedWeightedTree, w: f64, depth: usize) -> Result<RootedWeightedTree> {
    if depth == 0 || t.height() > depth || t2.height() + 1 > depth {
        return Err(Error::DepthMismatch(format!(
            "graft needs heights <= {depth} and <= {}, got {} and {}",
            depth.saturating_sub(1),
            t.height(),
            t2.height()
        )));
    }
    let mut out = t.clone();
    let id = out.attach_subtree(0, t2, 0);
    out.nodes[id].edge_weight = w;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(parents: &[usize]) -> RootedWeightedTree {
        let mut t = RootedWeightedTree::root(1.0, 0.0);
        for p in parents {
            t.add_child(*p, 1.0, 0.0, 0.0);
        }
        t
    }

    #[test]
    fn child_order_does_not_matter() {
        let mut a = RootedWeightedTree::root(1.0, 0.5);
        a.add_child(0, 2.0, 0.1, 0.3);
        let c = a.add_child(0, 3.0, 0.2, 0.4);
        a.add_child(c, 1.0, 0.0, 0.9);
        let mut b = RootedWeightedTree::root(1.0, 0.5);
        let c = b.add_child(0, 3.0, 0.2, 0.4);
        b.add_child(0, 2.0, 0.1, 0.3);
        b.add_child(c, 1.0, 0.0, 0.9);
        assert_eq!(a.canonical_code(), b.canonical_code());
        b.node_mut(3).edge_weight = 0.91;
        assert_ne!(a.canonical_code(), b.canonical_code());
        assert_eq!(a.code_with(CodeFields::SHAPE), b.code_with(CodeFields::SHAPE));
    }

    #[test]
    fn path_and_cherry_differ() {
        assert_ne!(shape(&[0, 1]).canonical_code(), shape(&[0, 0]).canonical_code());
    }

    #[test]
    fn truncate_and_graft() {
        let t = shape(&[0, 0, 1, 3]);
        assert_eq!(t.truncate(1).len(), 3);
        assert_eq!(t.truncate(0).len(), 1);
        assert_eq!(t.height(), 3);
        let g = graft(&RootedWeightedTree::root(1.0, 0.0), &RootedWeightedTree::root(2.0, 0.0), 0.3, 1).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.node(1).edge_weight, 0.3);
        let h = graft(&t, &shape(&[0]), 0.5, 3).unwrap();
        assert_eq!(h.root_degree(), t.root_degree() + 1);
        assert!(graft(&t, &t, 0.5, 3).is_err());
    }

    #[test]
    fn addresses_follow_ulam_harris() {
        let t = shape(&[0, 0, 2]);
        assert_eq!(t.address(0), Vec::<u32>::new());
        assert_eq!(t.address(2), vec![2]);
        assert_eq!(t.address(3), vec![2, 1]);
    }
}
