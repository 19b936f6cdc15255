//! Rooted, leaf-labelled trees: Newick parsing, edge splits and subforests.
//!
//! Nodes are numbered in pre-order from the root (children in source order),
//! so the root is node 0 and the edge above node `v` has id `v - 1`. Leaves
//! keep their first-appearance order from the Newick text.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum NewickError {
    #[error("unbalanced parentheses at byte {0}")]
    Unbalanced(usize),
    #[error("empty subtree at byte {0}")]
    EmptySubtree(usize),
    #[error("duplicate leaf label '{label}' at byte {pos}")]
    DuplicateLabel { label: String, pos: usize },
    #[error("missing terminating ';'")]
    MissingSemicolon,
    #[error("unexpected character '{ch}' at byte {pos}")]
    Unexpected { ch: char, pos: usize },
    #[error("invalid branch length at byte {0}")]
    BadLength(usize),
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("no edge with id {0}")]
    UnknownEdge(EdgeId),
    #[error("no leaf labelled '{0}'")]
    UnknownLeaf(String),
    #[error("split side is empty")]
    EmptySide,
    #[error("leaf sets overlap or do not cover the tree")]
    BadPartition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    label: Option<String>,
}

/// A rooted tree with labelled leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    nodes: Vec<Node>,
    leaves: Vec<NodeId>,
}

/// A bipartition of the leaf set. `below` and `above` hold leaf indices
/// (positions in [`Tree::leaf_labels`]) in increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Split {
    pub edge: Option<EdgeId>,
    pub below: Vec<usize>,
    pub above: Vec<usize>,
}

impl Split {
    /// Builds a split from explicit leaf index sets.
    pub fn from_indices(n_leaves: usize, below: &[usize]) -> Result<Split, TreeError> {
        let set: BTreeSet<usize> = below.iter().copied().collect();
        if set.len() != below.len() || set.iter().any(|&i| i >= n_leaves) {
            return Err(TreeError::BadPartition);
        }
        if set.is_empty() || set.len() == n_leaves {
            return Err(TreeError::EmptySide);
        }
        let above = (0..n_leaves).filter(|i| !set.contains(i)).collect();
        Ok(Split { edge: None, below: set.into_iter().collect(), above })
    }

    pub fn is_trivial(&self) -> bool {
        self.below.len() < 2 || self.above.len() < 2
    }

    /// Renders as `1,2|3,4` using the tree's labels.
    pub fn display(&self, tree: &Tree) -> String {
        let side = |s: &[usize]| {
            s.iter().map(|&i| tree.leaf_label(i).to_string()).collect::<Vec<_>>().join(",")
        };
        format!("{}|{}", side(&self.below), side(&self.above))
    }
}

/// An edge set given by its indicator vector over edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subforest(pub Vec<bool>);

impl Subforest {
    pub fn indicator_string(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_indicator(s: &str) -> Option<Subforest> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Subforest)
    }
}

impl fmt::Display for Subforest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.indicator_string())
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

// Intermediate parse tree; flattened into pre-order afterwards.
struct Raw {
    label: Option<String>,
    children: Vec<Raw>,
    start: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn label(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos] as char;
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-' {
                self.pos += 1;
            } else {
                break;
            }
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn branch_length(&mut self) -> Result<(), NewickError> {
        if self.peek() == Some(b':') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() {
                let c = self.src[self.pos] as char;
                if c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            if text.parse::<f64>().is_err() {
                return Err(NewickError::BadLength(start));
            }
        }
        Ok(())
    }

    fn subtree(&mut self, depth: usize) -> Result<Raw, NewickError> {
        let start = self.pos;
        match self.peek() {
            Some(b'(') => {
                let open = self.pos;
                self.pos += 1;
                let mut children = vec![self.subtree(depth + 1)?];
                loop {
                    match self.peek() {
                        Some(b',') => {
                            self.pos += 1;
                            children.push(self.subtree(depth + 1)?);
                        }
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        None | Some(b';') => return Err(NewickError::Unbalanced(open)),
                        Some(c) => {
                            return Err(NewickError::Unexpected { ch: c as char, pos: self.pos })
                        }
                    }
                }
                let label = self.label();
                self.branch_length()?;
                Ok(Raw { label, children, start })
            }
            Some(b')') if depth == 0 => Err(NewickError::Unbalanced(self.pos)),
            _ => {
                let pos = self.pos;
                match self.label() {
                    Some(label) => {
                        self.branch_length()?;
                        Ok(Raw { label: Some(label), children: Vec::new(), start: pos })
                    }
                    None => Err(NewickError::EmptySubtree(pos)),
                }
            }
        }
    }
}

impl Tree {
    /// Parses a single Newick tree terminated by `;`. Branch lengths are
    /// accepted and discarded; internal node labels are kept.
    pub fn parse_newick(text: &str) -> Result<Tree, NewickError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        let raw = p.subtree(0)?;
        match p.peek() {
            Some(b';') => p.pos += 1,
            Some(b')') => return Err(NewickError::Unbalanced(p.pos)),
            Some(c) => return Err(NewickError::Unexpected { ch: c as char, pos: p.pos }),
            None => return Err(NewickError::MissingSemicolon),
        }
        if let Some(c) = p.peek() {
            return Err(NewickError::Unexpected { ch: c as char, pos: p.pos });
        }

        let mut tree = Tree { nodes: Vec::new(), leaves: Vec::new() };
        let mut seen = HashSet::new();
        // Explicit stack keeps pre-order with children in source order.
        let mut stack: Vec<(Raw, Option<NodeId>)> = vec![(raw, None)];
        while let Some((r, parent)) = stack.pop() {
            let id = tree.nodes.len();
            if r.children.is_empty() {
                let label = r.label.clone().unwrap_or_default();
                if !seen.insert(label.clone()) {
                    return Err(NewickError::DuplicateLabel { label, pos: r.start });
                }
                tree.leaves.push(id);
            }
            tree.nodes.push(Node { parent, children: Vec::new(), label: r.label });
            if let Some(pa) = parent {
                tree.nodes[pa].children.push(id);
            }
            for c in r.children.into_iter().rev() {
                stack.push((c, Some(id)));
            }
        }
        Ok(tree)
    }

    /// Canonical Newick text (labels only, no branch lengths).
    pub fn to_newick(&self) -> String {
        fn rec(t: &Tree, v: NodeId, out: &mut String) {
            let node = &t.nodes[v];
            if !node.children.is_empty() {
                out.push('(');
                for (i, &c) in node.children.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    rec(t, c, out);
                }
                out.push(')');
            }
            if let Some(l) = &node.label {
                out.push_str(l);
            }
        }
        let mut out = String::new();
        rec(self, 0, &mut out);
        out.push(';');
        out
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf_label(&self, leaf_index: usize) -> &str {
        self.nodes[self.leaves[leaf_index]].label.as_deref().unwrap_or("")
    }

    pub fn leaf_labels(&self) -> Vec<&str> {
        (0..self.leaves.len()).map(|i| self.leaf_label(i)).collect()
    }

    pub fn leaf_index(&self, label: &str) -> Option<usize> {
        (0..self.leaves.len()).find(|&i| self.leaf_label(i) == label)
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v].parent
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v].children
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.nodes[v].children.is_empty()
    }

    /// `(parent, child)` endpoints of an edge.
    pub fn edge(&self, e: EdgeId) -> Result<(NodeId, NodeId), TreeError> {
        if e >= self.num_edges() {
            return Err(TreeError::UnknownEdge(e));
        }
        let child = e + 1;
        Ok((self.nodes[child].parent.expect("non-root node has a parent"), child))
    }

    pub fn edge_above(&self, v: NodeId) -> Option<EdgeId> {
        (v != 0).then(|| v - 1)
    }

    /// Nodes in post-order (children before parents).
    pub fn postorder(&self) -> Vec<NodeId> {
        // Reverse pre-order visits every child before its parent.
        (0..self.nodes.len()).rev().collect()
    }

    /// Leaf indices under node `v`, in leaf order.
    pub fn leaves_below(&self, v: NodeId) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        let mut nodes = Vec::new();
        while let Some(u) = stack.pop() {
            if self.is_leaf(u) {
                nodes.push(u);
            }
            stack.extend(self.nodes[u].children.iter().rev());
        }
        for u in nodes {
            out.push(self.leaves.iter().position(|&l| l == u).expect("leaf is registered"));
        }
        out.sort_unstable();
        out
    }

    pub fn edge_split(&self, e: EdgeId) -> Result<Split, TreeError> {
        let (_, child) = self.edge(e)?;
        let below = self.leaves_below(child);
        let above = (0..self.num_leaves()).filter(|i| !below.contains(i)).collect();
        Ok(Split { edge: Some(e), below, above })
    }

    /// The edge whose below-set is exactly the given leaf labels.
    pub fn edge_with_below(&self, labels: &[&str]) -> Result<EdgeId, TreeError> {
        let mut want = labels
            .iter()
            .map(|l| self.leaf_index(l).ok_or_else(|| TreeError::UnknownLeaf(l.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        want.sort_unstable();
        (0..self.num_edges())
            .find(|&e| self.leaves_below(e + 1) == want)
            .ok_or(TreeError::BadPartition)
    }

    /// Split from two groups of leaf labels, e.g. `{1,3} | {2,4}`.
    pub fn split_from_labels(&self, below: &[&str]) -> Result<Split, TreeError> {
        let idx = below
            .iter()
            .map(|l| self.leaf_index(l).ok_or_else(|| TreeError::UnknownLeaf(l.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let mut split = Split::from_indices(self.num_leaves(), &idx)?;
        split.edge = (0..self.num_edges()).find(|&e| self.leaves_below(e + 1) == split.below);
        Ok(split)
    }

    /// Edges with at least two leaves on each side.
    pub fn internal_splits(&self) -> Vec<Split> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in 0..self.num_edges() {
            let s = self.edge_split(e).expect("edge id in range");
            if s.is_trivial() {
                continue;
            }
            let key = s.below.clone().min(s.above.clone());
            if seen.insert(key) {
                out.push(s);
            }
        }
        out
    }

    /// Whether every degree-1 vertex of the edge set is a leaf of the tree.
    pub fn is_subforest(&self, edges: &[bool]) -> bool {
        assert_eq!(edges.len(), self.num_edges());
        let mut degree = vec![0usize; self.nodes.len()];
        for (e, &on) in edges.iter().enumerate() {
            if on {
                let (p, c) = self.edge(e).expect("edge id in range");
                degree[p] += 1;
                degree[c] += 1;
            }
        }
        degree
            .iter()
            .enumerate()
            .all(|(v, &d)| d != 1 || (self.is_leaf(v) && v != 0))
    }

    /// All subforests sorted lexicographically by indicator vector
    /// (the empty edge set first).
    pub fn enumerate_subforests(&self) -> Vec<Subforest> {
        // configs[v][up] = edge sets inside the subtree of v that are valid at
        // every vertex strictly below v and at v itself, given whether the
        // edge above v is selected.
        let e_count = self.num_edges();
        let mut configs: Vec<[Vec<Vec<EdgeId>>; 2]> = vec![[Vec::new(), Vec::new()]; self.num_nodes()];
        for v in self.postorder() {
            if self.is_leaf(v) && v != 0 {
                configs[v] = [vec![Vec::new()], vec![Vec::new()]];
                continue;
            }
            // Combine children: track how many child edges are on.
            let mut partial: Vec<(usize, Vec<EdgeId>)> = vec![(0, Vec::new())];
            for &c in &self.nodes[v].children {
                let edge = c - 1;
                let mut next = Vec::new();
                for (count, set) in &partial {
                    for sub in &configs[c][0] {
                        let mut s = set.clone();
                        s.extend(sub);
                        next.push((*count, s));
                    }
                    for sub in &configs[c][1] {
                        let mut s = set.clone();
                        s.push(edge);
                        s.extend(sub);
                        next.push((count + 1, s));
                    }
                }
                partial = next;
            }
            for (up, slot) in configs[v].iter_mut().enumerate() {
                *slot = partial
                    .iter()
                    .filter(|(count, _)| count + up != 1)
                    .map(|(_, s)| s.clone())
                    .collect();
            }
        }
        let mut out: Vec<Subforest> = configs[0][0]
            .iter()
            .map(|set| {
                let mut ind = vec![false; e_count];
                for &e in set {
                    ind[e] = true;
                }
                Subforest(ind)
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Letter name of an edge: a..z, then aa, ab, ...
pub fn edge_letter(e: EdgeId) -> String {
    let mut n = e + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}
