//! Rooted trees with edge lengths, stored by node depth (distance from the
//! root), with Newick import and export.

use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Distance from the root.
    pub depth: f64,
    pub label: Option<String>,
}

/// Rooted tree. Node 0 is always the root; the root may carry a stub above
/// it (`root_length`), which Newick writes as the root branch length.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    root_length: f64,
}

impl Tree {
    pub fn with_root(root_length: f64) -> Self {
        Self {
            nodes: vec![Node { parent: None, children: Vec::new(), depth: 0.0, label: None }],
            root_length,
        }
    }

    /// Root placed at `depth` below some reference point (e.g. the top of a
    /// stub of length `root_length`).
    pub fn with_root_at(depth: f64, root_length: f64) -> Self {
        let mut t = Self::with_root(root_length);
        t.nodes[0].depth = depth;
        t
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn root_length(&self) -> f64 {
        self.root_length
    }

    pub fn add_child(&mut self, parent: usize, depth: f64, label: Option<String>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { parent: Some(parent), children: Vec::new(), depth, label });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn set_label(&mut self, i: usize, label: impl Into<String>) {
        self.nodes[i].label = Some(label.into());
    }

    /// Length of the edge above node `i`.
    pub fn edge_length(&self, i: usize) -> f64 {
        match self.nodes[i].parent {
            Some(p) => self.nodes[i].depth - self.nodes[p].depth,
            None => self.root_length,
        }
    }

    /// Leaves in depth-first (planar) order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            let ch = &self.nodes[u].children;
            if ch.is_empty() {
                out.push(u);
            } else {
                stack.extend(ch.iter().rev());
            }
        }
        out
    }

    pub fn leaf_by_label(&self, label: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.children.is_empty() && n.label.as_deref() == Some(label))
    }

    fn ancestors(&self, mut u: usize) -> Vec<usize> {
        let mut out = vec![u];
        while let Some(p) = self.nodes[u].parent {
            out.push(p);
            u = p;
        }
        out
    }

    pub fn lca(&self, u: usize, v: usize) -> usize {
        let au = self.ancestors(u);
        let mut mark = vec![false; self.nodes.len()];
        for &a in &au {
            mark[a] = true;
        }
        let mut w = v;
        while !mark[w] {
            w = self.nodes[w].parent.expect("nodes share the root");
        }
        w
    }

    /// Path length between two nodes.
    pub fn distance(&self, u: usize, v: usize) -> f64 {
        let w = self.lca(u, v);
        self.path_length(u, w) + self.path_length(v, w)
    }

    /// Sum of edge lengths from `u` up to its ancestor `w`.
    pub fn path_length(&self, mut u: usize, w: usize) -> f64 {
        let mut total = 0.0;
        while u != w {
            total += self.edge_length(u);
            u = self.nodes[u].parent.expect("w is an ancestor of u");
        }
        total
    }

    /// Distance between two points lying on edges: `(u, y)` is the point at
    /// depth `y` on the edge above node `u` (`y <= depth(u)`).
    pub fn point_distance(&self, (u, y): (usize, f64), (v, z): (usize, f64)) -> f64 {
        if u == v {
            return (y - z).abs();
        }
        let w = self.lca(u, v);
        if w == u {
            return z - y;
        }
        if w == v {
            return y - z;
        }
        y + z - 2.0 * self.nodes[w].depth
    }

    /// Newick string with branch lengths written to 12 significant digits.
    pub fn to_newick(&self) -> String {
        let mut s = String::new();
        self.write_node(0, &mut s);
        if self.root_length > 0.0 {
            s.push(':');
            s.push_str(&fmt_sig(self.root_length, 12));
        }
        s.push(';');
        s
    }

    fn write_node(&self, u: usize, out: &mut String) {
        let n = &self.nodes[u];
        if !n.children.is_empty() {
            out.push('(');
            for (k, &c) in n.children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                self.write_node(c, out);
                out.push(':');
                out.push_str(&fmt_sig(self.edge_length(c), 12));
            }
            out.push(')');
        }
        if let Some(l) = &n.label {
            out.push_str(l);
        }
    }

    /// Parses a Newick string with optional labels and branch lengths.
    /// Missing lengths are read as 0. Bracketed comments are skipped.
    pub fn from_newick(text: &str) -> Result<Self> {
        let cleaned = strip_comments(text);
        let src = cleaned.trim();
        let Some(body) = src.strip_suffix(';') else {
            bail!(Validation, "Newick string must end with ';'");
        };
        let mut p = NewickParser { s: body.as_bytes(), i: 0 };
        let parsed = p.subtree()?;
        p.skip_ws();
        if p.i != p.s.len() {
            bail!(Validation, "trailing characters in Newick at byte {}", p.i);
        }
        let mut tree = Tree::with_root(parsed.length);
        tree.nodes[0].label = parsed.label.clone();
        fn attach(tree: &mut Tree, at: usize, sub: &ParsedNode) {
            for ch in &sub.children {
                let depth = tree.nodes[at].depth + ch.length;
                let id = tree.add_child(at, depth, ch.label.clone());
                attach(tree, id, ch);
            }
        }
        attach(&mut tree, 0, &parsed);
        Ok(tree)
    }

    /// Order-independent, label-free string describing the shape and edge
    /// lengths; two trees are isomorphic with equal lengths iff these match.
    pub fn canonical_shape(&self, digits: usize) -> String {
        fn go(t: &Tree, u: usize, digits: usize) -> String {
            let mut parts: Vec<String> = t.nodes[u]
                .children
                .iter()
                .map(|&c| format!("{}:{}", go(t, c, digits), fmt_sig(t.edge_length(c), digits)))
                .collect();
            parts.sort();
            format!("({})", parts.join(","))
        }
        go(self, 0, digits)
    }
}

fn strip_comments(s: &str) -> String {
    let mut depth = 0;
    s.chars()
        .filter(|&c| match c {
            '[' => {
                depth += 1;
                false
            }
            ']' => {
                depth -= 1;
                false
            }
            _ => depth == 0,
        })
        .collect()
}

struct ParsedNode {
    children: Vec<ParsedNode>,
    label: Option<String>,
    length: f64,
}

struct NewickParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl NewickParser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn subtree(&mut self) -> Result<ParsedNode> {
        let mut children = Vec::new();
        if self.peek() == Some(b'(') {
            self.i += 1;
            loop {
                children.push(self.subtree()?);
                match self.peek() {
                    Some(b',') => self.i += 1,
                    Some(b')') => {
                        self.i += 1;
                        break;
                    }
                    _ => bail!(Validation, "expected ',' or ')' in Newick at byte {}", self.i),
                }
            }
        }
        let label = self.token();
        let length = if self.peek() == Some(b':') {
            self.i += 1;
            let tok = self.token().unwrap_or_default();
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => bail!(Validation, "bad branch length '{tok}' in Newick"),
            }
        } else {
            0.0
        };
        Ok(ParsedNode { children, label, length })
    }

    fn token(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.i;
        while self.i < self.s.len() && !b"(),:;".contains(&self.s[self.i]) {
            self.i += 1;
        }
        let tok = std::str::from_utf8(&self.s[start..self.i]).ok()?.trim();
        (!tok.is_empty()).then(|| tok.to_string())
    }
}

/// Formats `x` with `sig` significant digits, trimming trailing zeros.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        let s = format!("{:.*e}", sig.saturating_sub(1), x);
        let (m, e) = s.split_once('e').unwrap();
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        return format!("{m}e{e}");
    }
    let decimals = (sig as i32 - 1 - mag).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
