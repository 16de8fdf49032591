//! Trees coded by càdlàg contour functions and their spheres as combs.
//!
//! A contour here is piecewise linear: it climbs only by jumps and decreases
//! with slope −1 in between, stopping at 0. Each jump is one branch of the
//! coded tree, running from the depth just before the jump to the depth just
//! after it.

use serde::{Deserialize, Serialize};

use crate::comb::{Comb, Tooth};
use crate::error::{bail, Result};
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub before: f64,
    pub after: f64,
}

/// Jumping contour: ordered jumps, slope −1 in between, absorbed at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Jump>", into = "Vec<Jump>")]
pub struct ContourFunction {
    jumps: Vec<Jump>,
}

impl TryFrom<Vec<Jump>> for ContourFunction {
    type Error = crate::Error;

    fn try_from(jumps: Vec<Jump>) -> Result<Self> {
        Self::new(jumps)
    }
}

impl From<ContourFunction> for Vec<Jump> {
    fn from(c: ContourFunction) -> Self {
        c.jumps
    }
}

const CONTINUITY_TOL: f64 = 1e-9;

impl ContourFunction {
    pub fn new(jumps: Vec<Jump>) -> Result<Self> {
        let mut value = 0.0;
        let mut last_time = f64::NEG_INFINITY;
        for (i, j) in jumps.iter().enumerate() {
            if !(j.time.is_finite() && j.time >= 0.0 && j.time > last_time) {
                bail!(Validation, "jump {i} at time {} is not strictly after {last_time}", j.time);
            }
            if !(j.after.is_finite() && j.before >= 0.0) {
                bail!(Validation, "jump {i} has invalid values ({}, {})", j.before, j.after);
            }
            if j.after < j.before {
                bail!(Validation, "negative jump at time {}: {} -> {}", j.time, j.before, j.after);
            }
            let expected = if i == 0 { 0.0 } else { (value - (j.time - last_time)).max(0.0) };
            let scale = 1.0f64.max(expected.abs()).max(j.before.abs());
            if (j.before - expected).abs() > CONTINUITY_TOL * scale {
                bail!(
                    Validation,
                    "jump {i} starts at {} but the path is at {expected} (slope −1 between jumps)",
                    j.before
                );
            }
            value = j.after;
            last_time = j.time;
        }
        Ok(Self { jumps })
    }

    /// Builds the contour from `(time, size)` pairs, deriving the values.
    pub fn from_jumps(jumps: &[(f64, f64)]) -> Result<Self> {
        let mut out = Vec::with_capacity(jumps.len());
        let mut value = 0.0;
        let mut last: Option<f64> = None;
        for &(time, size) in jumps {
            if size < 0.0 {
                bail!(Validation, "negative jump of size {size} at time {time}");
            }
            let before = match last {
                None => 0.0,
                Some(t0) => (value - (time - t0)).max(0.0),
            };
            out.push(Jump { time, before, after: before + size });
            value = before + size;
            last = Some(time);
        }
        Self::new(out)
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Last time at which the contour is nonzero (σ_h).
    pub fn support_end(&self) -> f64 {
        self.jumps.last().map_or(0.0, |j| j.time + j.after)
    }

    /// h(t), right-continuous.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.time <= t);
        if k == 0 {
            return 0.0;
        }
        let j = &self.jumps[k - 1];
        (j.after - (t - j.time)).max(0.0)
    }

    /// h(t−).
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.time < t);
        if k == 0 {
            return 0.0;
        }
        let j = &self.jumps[k - 1];
        (j.after - (t - j.time)).max(0.0)
    }
}

/// Tree coded by a contour, with the bookkeeping needed to map contour
/// times to points of the tree.
#[derive(Debug, Clone)]
pub struct ContourTree {
    tree: Tree,
    contour: ContourFunction,
    /// For each branch, its nodes as `(depth, node)` sorted by depth; the
    /// last entry is the tip.
    chains: Vec<Vec<(f64, usize)>>,
}

impl ContourTree {
    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn into_tree(self) -> Tree {
        self.tree
    }

    /// Tip node of the branch created by jump `i`.
    pub fn tip(&self, i: usize) -> usize {
        self.chains[i].last().expect("chains are nonempty").1
    }

    /// The point `p_h(t)` as `(node, depth)`: the point at `depth` on the
    /// edge above `node`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let v = self.contour.eval(t);
        let mut stack: Vec<usize> = Vec::new();
        for (i, j) in self.contour.jumps.iter().enumerate() {
            if j.time > t {
                break;
            }
            while stack.last().is_some_and(|&k| self.contour.jumps[k].before >= j.before) {
                stack.pop();
            }
            stack.push(i);
        }
        while stack.last().is_some_and(|&k| self.contour.jumps[k].before >= v) {
            stack.pop();
        }
        match stack.last() {
            None => (self.tree.root(), 0.0),
            Some(&k) => {
                let chain = &self.chains[k];
                let at = chain.partition_point(|&(d, _)| d < v);
                (chain[at.min(chain.len() - 1)].1, v)
            }
        }
    }

    /// Tree distance between `p_h(s)` and `p_h(t)`.
    pub fn distance(&self, s: f64, t: f64) -> f64 {
        self.tree.point_distance(self.locate(s), self.locate(t))
    }
}

/// The tree coded by `h`: each jump is a branch whose base is glued to the
/// branch the contour was descending when the jump occurred (or to the root).
/// Leaves are labelled by jump index.
pub fn tree_from_contour(h: &ContourFunction) -> ContourTree {
    let jumps = &h.jumps;
    let n = jumps.len();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut stack: Vec<usize> = Vec::new();
    for (i, j) in jumps.iter().enumerate() {
        while stack.last().is_some_and(|&k| jumps[k].before >= j.before) {
            stack.pop();
        }
        parent[i] = stack.last().copied();
        stack.push(i);
    }
    let mut attach_depths: Vec<Vec<f64>> = vec![Vec::new(); n];
    for i in 0..n {
        if let Some(p) = parent[i] {
            attach_depths[p].push(jumps[i].before);
        }
    }

    let mut tree = Tree::with_root(0.0);
    let mut chains: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n);
    for i in 0..n {
        let base = jumps[i].before;
        let mut node = match parent[i] {
            None => tree.root(),
            Some(p) => {
                let chain: &Vec<(f64, usize)> = &chains[p];
                chain[chain.partition_point(|&(d, _)| d < base)].1
            }
        };
        let mut depths = std::mem::take(&mut attach_depths[i]);
        depths.sort_by(f64::total_cmp);
        depths.dedup();
        let mut chain = Vec::with_capacity(depths.len() + 1);
        for d in depths {
            node = tree.add_child(node, d, None);
            chain.push((d, node));
        }
        let tip = tree.add_child(node, jumps[i].after, Some(i.to_string()));
        chain.push((jumps[i].after, tip));
        chains.push(chain);
    }
    ContourTree { tree, contour: h.clone(), chains }
}

/// Jumping contour of a planar tree: the first child of every node continues
/// its parent's branch and later children are visited left to right as the
/// contour descends. Depths are taken relative to the root.
pub fn contour_from_tree(tree: &Tree) -> ContourFunction {
    fn emit(tree: &Tree, start: usize, base: f64, root_depth: f64, t: &mut f64, out: &mut Vec<Jump>) {
        let mut chain = vec![start];
        let mut u = start;
        while let Some(&c) = tree.node(u).children.first() {
            chain.push(c);
            u = c;
        }
        let mut value = tree.node(u).depth - root_depth;
        out.push(Jump { time: *t, before: base, after: value });
        for &w in chain.iter().rev().skip(1) {
            let dw = tree.node(w).depth - root_depth;
            for &c in &tree.node(w).children[1..] {
                *t += value - dw;
                value = dw;
                emit(tree, c, dw, root_depth, t, out);
            }
        }
        *t += value - base;
    }
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let root_depth = tree.node(tree.root()).depth;
    emit(tree, tree.root(), 0.0, root_depth, &mut t, &mut jumps);
    ContourFunction { jumps }
}

/// The sphere at level `level` as a comb: one boundary point per visit of
/// the level, consecutive points separated by a tooth whose height is the
/// depth of the excursion of `h` below the level between the two visits.
/// Visits are laid out with unit spacing on `[0, #visits]`.
pub fn sphere_comb_from_contour(h: &ContourFunction, level: f64) -> Result<Comb> {
    if !(level > 0.0 && level.is_finite()) {
        bail!(Domain, "sphere level must be positive, got {level}");
    }
    let jumps = &h.jumps;
    let visits: Vec<usize> =
        (0..jumps.len()).filter(|&i| jumps[i].before < level && level <= jumps[i].after).collect();
    if visits.is_empty() {
        bail!(Domain, "the contour never reaches level {level}; the sphere is empty");
    }
    let mut teeth = Vec::with_capacity(visits.len() - 1);
    for (k, w) in visits.windows(2).enumerate() {
        let trough = jumps[w[0] + 1..=w[1]].iter().fold(level, |m, j| m.min(j.before));
        let depth = level - trough;
        if depth >= level {
            bail!(
                Validation,
                "the contour returns to 0 between visits {} and {} of level {level}: the root is a branch point of the sphere",
                k,
                k + 1
            );
        }
        teeth.push(Tooth::new((k + 1) as f64, depth));
    }
    Comb::new(visits.len() as f64, level, teeth)
}

/// Times at which the contour visits `level`, in order.
pub fn level_visit_times(h: &ContourFunction, level: f64) -> Vec<f64> {
    let jumps = &h.jumps;
    let mut out = Vec::new();
    for (i, j) in jumps.iter().enumerate() {
        if !(j.before < level && level <= j.after) {
            continue;
        }
        // Subtrees grafted above the level are explored before the descent.
        let (mut t, mut v) = (j.time, j.after);
        for k in &jumps[i + 1..] {
            if k.before <= level {
                break;
            }
            (t, v) = (k.time, k.after);
        }
        out.push(t + (v - level));
    }
    out
}
