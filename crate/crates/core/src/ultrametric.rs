//! Conversions between combs, ultrametric distance matrices and trees.

use crate::comb::{distance_unchecked, BoundaryPoint, Comb, Tooth};
use crate::error::{bail, Result};
use crate::tree::Tree;

/// Relative slack allowed on the ultrametric triple inequality.
pub const ULTRAMETRIC_RTOL: f64 = 1e-9;

/// Pairwise comb distances between the lineage endpoints of `positions`.
pub fn distance_matrix(c: &Comb, positions: &[f64]) -> Result<Vec<Vec<f64>>> {
    for &x in positions {
        if !(0.0..=c.interval_length()).contains(&x) {
            bail!(Domain, "position {x} outside [0, {}]", c.interval_length());
        }
    }
    Ok(positions
        .iter()
        .map(|&s| {
            positions
                .iter()
                .map(|&t| distance_unchecked(c, BoundaryPoint::at(s), BoundaryPoint::at(t)))
                .collect()
        })
        .collect())
}

/// Checks that `d` is a square, symmetric, zero-diagonal ultrametric.
pub fn validate_ultrametric(d: &[Vec<f64>]) -> Result<()> {
    let n = d.len();
    for (i, row) in d.iter().enumerate() {
        if row.len() != n {
            bail!(Validation, "row {i} has length {} in a {n}x{n} matrix", row.len());
        }
        if row[i] != 0.0 {
            bail!(Validation, "nonzero diagonal entry d[{i}][{i}] = {}", row[i]);
        }
        for (j, &x) in row.iter().enumerate() {
            if !(x.is_finite() && x >= 0.0) {
                bail!(Validation, "d[{i}][{j}] = {x} is not a nonnegative finite number");
            }
            let y = d[j][i];
            if (x - y).abs() > ULTRAMETRIC_RTOL * x.max(y) {
                bail!(Validation, "matrix is not symmetric at ({i}, {j}): {x} vs {y}");
            }
        }
    }
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let bound = d[x][y].max(d[y][z]);
                if d[x][z] > bound * (1.0 + ULTRAMETRIC_RTOL) {
                    bail!(
                        Validation,
                        "ultrametric inequality fails for ({x}, {y}, {z}): {} > max({}, {})",
                        d[x][z],
                        d[x][y],
                        d[y][z]
                    );
                }
            }
        }
    }
    Ok(())
}

/// A comb built from an ultrametric matrix together with the sub-interval
/// `[lo, hi)` assigned to each input point.
#[derive(Debug, Clone)]
pub struct CombEmbedding {
    pub comb: Comb,
    pub placement: Vec<(f64, f64)>,
}

impl CombEmbedding {
    pub fn midpoint(&self, i: usize) -> f64 {
        let (lo, hi) = self.placement[i];
        0.5 * (lo + hi)
    }
}

/// Builds a comb whose metric reproduces `d` on the assigned sub-intervals.
///
/// Balls are split recursively from the largest radius down. A ball of mass
/// `m` is laid out as an interval of length `m` and its sub-balls are
/// separated by walls of height `r / 2`. Without explicit `masses` each
/// fragmenting ball shares its mass equally among its sub-balls (visibility
/// measure, unit total mass). The origin height defaults to the diameter of
/// the space (1 for a single point).
pub fn comb_from_ultrametric(
    d: &[Vec<f64>],
    masses: Option<&[f64]>,
    origin_height: Option<f64>,
) -> Result<CombEmbedding> {
    let n = d.len();
    if n == 0 {
        bail!(Validation, "empty distance matrix");
    }
    validate_ultrametric(d)?;
    if let Some(m) = masses {
        if m.len() != n {
            bail!(Validation, "{} masses for {n} points", m.len());
        }
        if let Some(x) = m.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            bail!(Validation, "masses must be positive, got {x}");
        }
    }
    let total = masses.map_or(1.0, |m| m.iter().sum());

    let mut teeth = Vec::new();
    let mut placement = vec![(0.0, 0.0); n];
    let mut work = vec![((0..n).collect::<Vec<usize>>(), 0.0f64, total)];
    while let Some((set, start, mass)) = work.pop() {
        let diameter = set
            .iter()
            .flat_map(|&i| set.iter().map(move |&j| (i, j)))
            .fold(0.0, |m: f64, (i, j)| m.max(d[i][j]));
        if set.len() == 1 || diameter == 0.0 {
            for &i in &set {
                placement[i] = (start, start + mass);
            }
            continue;
        }
        let parts = components_below(d, &set, diameter);
        let k = parts.len() as f64;
        let mut at = start;
        for (p, part) in parts.iter().enumerate() {
            let m = match masses {
                Some(w) => part.iter().map(|&i| w[i]).sum(),
                None => mass / k,
            };
            if p > 0 {
                teeth.push(Tooth::new(at, diameter / 2.0));
            }
            work.push((part.clone(), at, m));
            at += m;
        }
    }
    teeth.sort_by(|a, b| a.pos.total_cmp(&b.pos));
    let max_h = teeth.iter().fold(0.0, |m: f64, t| m.max(t.h));
    let origin = origin_height.unwrap_or(if max_h > 0.0 { 2.0 * max_h } else { 1.0 });
    let comb = Comb::new(total, origin, teeth)?;
    Ok(CombEmbedding { comb, placement })
}

/// Connected components of `set` under `d < r`, ordered by smallest index.
fn components_below(d: &[Vec<f64>], set: &[usize], r: f64) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; set.len()];
    let mut parts: Vec<Vec<usize>> = Vec::new();
    for s in 0..set.len() {
        if label[s] != usize::MAX {
            continue;
        }
        let id = parts.len();
        label[s] = id;
        let mut stack = vec![s];
        let mut part = Vec::new();
        while let Some(a) = stack.pop() {
            part.push(set[a]);
            for b in 0..set.len() {
                if label[b] == usize::MAX && d[set[a]][set[b]] < r {
                    label[b] = id;
                    stack.push(b);
                }
            }
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts
}

/// The ultrametric tree of a comb: leaf `i` is the `i`-th inter-tooth
/// interval, each tooth is an internal node at height `h` above the leaves,
/// and the root carries a stub up to the origin height. Node depths are
/// measured from the top of the origin branch, so every leaf sits at depth
/// `origin_height`.
pub fn comb_to_tree(c: &Comb) -> Tree {
    let t_origin = c.origin_height();
    let teeth = c.teeth();
    let n = teeth.len();
    if n == 0 {
        let mut tree = Tree::with_root_at(t_origin, t_origin);
        tree.set_label(0, "0");
        return tree;
    }
    // Cartesian tree on heights (max at the root).
    let mut left = vec![None; n];
    let mut right = vec![None; n];
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..n {
        let mut last = None;
        while let Some(&top) = stack.last() {
            if teeth[top].h < teeth[i].h {
                last = stack.pop();
            } else {
                break;
            }
        }
        left[i] = last;
        if let Some(&top) = stack.last() {
            right[top] = Some(i);
        }
        stack.push(i);
    }
    let top = stack[0];
    let mut tree = Tree::with_root_at(t_origin - teeth[top].h, t_origin - teeth[top].h);
    enum Child {
        Tooth(usize),
        Leaf(usize),
    }
    let mut work = vec![(top, tree.root())];
    while let Some((i, node)) = work.pop() {
        let kids = [
            left[i].map_or(Child::Leaf(i), Child::Tooth),
            right[i].map_or(Child::Leaf(i + 1), Child::Tooth),
        ];
        for kid in kids {
            match kid {
                Child::Tooth(j) => {
                    let id = tree.add_child(node, t_origin - teeth[j].h, None);
                    work.push((j, id));
                }
                Child::Leaf(l) => {
                    tree.add_child(node, t_origin, Some(l.to_string()));
                }
            }
        }
    }
    tree
}
