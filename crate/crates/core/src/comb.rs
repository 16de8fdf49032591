//! Combs and the comb ultrametric.
//!
//! A comb is a finite list of teeth `(position, height)` on an interval
//! `[0, a]`, together with the height `T` of the origin branch sitting at
//! position 0. The distance between two boundary points is twice the highest
//! tooth standing between them. Teeth below the declared truncation level are
//! absent, so distances are only resolved above `2 * truncation`.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tooth {
    pub pos: f64,
    pub h: f64,
}

impl Tooth {
    pub fn new(pos: f64, h: f64) -> Self {
        Self { pos, h }
    }
}

/// A validated comb. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComb")]
pub struct Comb {
    interval_length: f64,
    origin_height: f64,
    teeth: Vec<Tooth>,
    #[serde(default, skip_serializing_if = "is_zero")]
    truncation: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Deserialize)]
struct RawComb {
    interval_length: f64,
    origin_height: f64,
    teeth: Vec<Tooth>,
    #[serde(default)]
    truncation: f64,
}

impl TryFrom<RawComb> for Comb {
    type Error = Error;

    fn try_from(raw: RawComb) -> Result<Self> {
        Comb::with_truncation(raw.interval_length, raw.origin_height, raw.teeth, raw.truncation)
    }
}

impl Comb {
    pub fn new(interval_length: f64, origin_height: f64, teeth: Vec<Tooth>) -> Result<Self> {
        Self::with_truncation(interval_length, origin_height, teeth, 0.0)
    }

    pub fn with_truncation(
        interval_length: f64,
        origin_height: f64,
        teeth: Vec<Tooth>,
        truncation: f64,
    ) -> Result<Self> {
        if !(interval_length.is_finite() && interval_length > 0.0) {
            bail!(Validation, "interval length must be positive and finite, got {interval_length}");
        }
        if !(origin_height.is_finite() && origin_height > 0.0) {
            bail!(Validation, "origin height must be positive and finite, got {origin_height}");
        }
        if !(truncation.is_finite() && truncation >= 0.0) {
            bail!(Validation, "truncation level must be nonnegative, got {truncation}");
        }
        let mut prev = 0.0;
        for (i, t) in teeth.iter().enumerate() {
            if !(t.pos > prev && t.pos < interval_length) {
                if t.pos == prev && i > 0 {
                    bail!(Validation, "duplicate tooth position {}", t.pos);
                }
                bail!(
                    Validation,
                    "tooth {i} at {} is not strictly increasing inside (0, {interval_length})",
                    t.pos
                );
            }
            if !(t.h.is_finite() && t.h > 0.0) {
                bail!(Validation, "tooth {i} has non-positive height {}", t.h);
            }
            if t.h >= origin_height {
                bail!(
                    Validation,
                    "tooth {i} height {} is not below the origin height {origin_height}",
                    t.h
                );
            }
            prev = t.pos;
        }
        Ok(Self { interval_length, origin_height, teeth, truncation })
    }

    /// Comb on `[0, a]` from parallel position/height slices.
    pub fn from_parts(
        interval_length: f64,
        origin_height: f64,
        positions: &[f64],
        heights: &[f64],
    ) -> Result<Self> {
        if positions.len() != heights.len() {
            bail!(Validation, "{} positions but {} heights", positions.len(), heights.len());
        }
        let teeth = positions.iter().zip(heights).map(|(&pos, &h)| Tooth { pos, h }).collect();
        Self::new(interval_length, origin_height, teeth)
    }

    pub fn interval_length(&self) -> f64 {
        self.interval_length
    }

    pub fn origin_height(&self) -> f64 {
        self.origin_height
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn teeth(&self) -> &[Tooth] {
        &self.teeth
    }

    pub fn n_teeth(&self) -> usize {
        self.teeth.len()
    }

    /// Number of inter-tooth intervals (leaves of the associated tree).
    pub fn n_leaves(&self) -> usize {
        self.teeth.len() + 1
    }

    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        self.teeth.iter().map(|t| t.h)
    }

    pub fn max_height(&self) -> f64 {
        self.heights().fold(0.0, f64::max)
    }

    /// The `i`-th inter-tooth interval `[lo, hi]`.
    pub fn leaf_interval(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 { 0.0 } else { self.teeth[i - 1].pos };
        let hi = self.teeth.get(i).map_or(self.interval_length, |t| t.pos);
        (lo, hi)
    }

    /// Lengths of the inter-tooth intervals; they sum to the interval length.
    pub fn leaf_measures(&self) -> Vec<f64> {
        (0..self.n_leaves())
            .map(|i| {
                let (lo, hi) = self.leaf_interval(i);
                hi - lo
            })
            .collect()
    }

    pub fn leaf_midpoints(&self) -> Vec<f64> {
        (0..self.n_leaves())
            .map(|i| {
                let (lo, hi) = self.leaf_interval(i);
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Index of the inter-tooth interval containing `x`; a point sitting
    /// exactly on a tooth is assigned to the interval on its right.
    pub fn leaf_of(&self, x: f64) -> usize {
        self.teeth.partition_point(|t| t.pos <= x)
    }

    /// Number of teeth with position `<= x`.
    pub(crate) fn teeth_up_to(&self, x: f64) -> usize {
        self.teeth.partition_point(|t| t.pos <= x)
    }

    /// Number of teeth with position `< x`.
    pub(crate) fn teeth_before(&self, x: f64) -> usize {
        self.teeth.partition_point(|t| t.pos < x)
    }

    /// Highest tooth among indices `lo..hi` (0 when empty).
    pub fn max_over(&self, lo: usize, hi: usize) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        self.teeth[lo..hi].iter().fold(0.0, |m, t| m.max(t.h))
    }

    /// Highest tooth with position in the open interval `(s, t)`.
    pub fn max_between(&self, s: f64, t: f64) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        self.max_over(self.teeth_up_to(s), self.teeth_before(t))
    }

    fn check_position(&self, x: f64) -> Result<()> {
        if !(0.0..=self.interval_length).contains(&x) {
            bail!(Domain, "position {x} outside [0, {}]", self.interval_length);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Left,
    Right,
}

/// A point of the completed boundary: a position together with a face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub position: f64,
    pub face: Face,
}

impl BoundaryPoint {
    pub fn new(position: f64, face: Face) -> Result<Self> {
        if face == Face::Left && position == 0.0 {
            bail!(Domain, "the left face of 0 is identified with the origin");
        }
        if !position.is_finite() {
            bail!(Domain, "non-finite position {position}");
        }
        Ok(Self { position, face })
    }

    /// The point reached by the lineage of `x`, i.e. its right face.
    pub fn at(position: f64) -> Self {
        Self { position, face: Face::Right }
    }

    pub fn left(position: f64) -> Result<Self> {
        Self::new(position, Face::Left)
    }

    pub fn right(position: f64) -> Result<Self> {
        Self::new(position, Face::Right)
    }
}

/// Comb distance between two boundary points.
///
/// For `s < t` the maximum runs over `(s, t)`, closed at `s` when `s` is a
/// left face and closed at `t` when `t` is a right face.
pub fn comb_distance(c: &Comb, p: BoundaryPoint, q: BoundaryPoint) -> Result<f64> {
    c.check_position(p.position)?;
    c.check_position(q.position)?;
    if p.face == Face::Left && p.position == 0.0 || q.face == Face::Left && q.position == 0.0 {
        bail!(Domain, "the left face of 0 is identified with the origin");
    }
    Ok(distance_unchecked(c, p, q))
}

pub(crate) fn distance_unchecked(c: &Comb, p: BoundaryPoint, q: BoundaryPoint) -> f64 {
    if p.position == q.position {
        if p.face == q.face {
            return 0.0;
        }
        let i = c.teeth_before(p.position);
        return match c.teeth.get(i) {
            Some(t) if t.pos == p.position => 2.0 * t.h,
            _ => 0.0,
        };
    }
    let (a, b) = if p.position < q.position { (p, q) } else { (q, p) };
    let lo = match a.face {
        Face::Left => c.teeth_before(a.position),
        Face::Right => c.teeth_up_to(a.position),
    };
    let hi = match b.face {
        Face::Left => c.teeth_before(b.position),
        Face::Right => c.teeth_up_to(b.position),
    };
    2.0 * c.max_over(lo, hi)
}

/// Distance between the lineage endpoints of two positions (right faces).
pub fn position_distance(c: &Comb, s: f64, t: f64) -> Result<f64> {
    comb_distance(c, BoundaryPoint::at(s), BoundaryPoint::at(t))
}

/// Block-maximum index over a comb's heights for fast range queries on
/// combs with many teeth.
#[derive(Debug, Clone)]
pub struct CombIndex<'a> {
    heights: Vec<f64>,
    block_max: Vec<f64>,
    comb: &'a Comb,
}

const BLOCK: usize = 128;

impl<'a> CombIndex<'a> {
    pub fn new(comb: &'a Comb) -> Self {
        let heights: Vec<f64> = comb.heights().collect();
        let block_max = heights.chunks(BLOCK).map(|c| c.iter().fold(0.0, |m: f64, &h| m.max(h))).collect();
        Self { heights, block_max, comb }
    }

    pub fn comb(&self) -> &'a Comb {
        self.comb
    }

    /// Maximum height over tooth indices `lo..hi`.
    pub fn range_max(&self, lo: usize, hi: usize) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        let (bl, bh) = (lo / BLOCK, (hi - 1) / BLOCK);
        if bl == bh {
            return self.heights[lo..hi].iter().fold(0.0, |m, &h| m.max(h));
        }
        let head = self.heights[lo..(bl + 1) * BLOCK].iter().fold(0.0, |m: f64, &h| m.max(h));
        let mid = self.block_max[bl + 1..bh].iter().fold(head, |m, &h| m.max(h));
        self.heights[bh * BLOCK..hi].iter().fold(mid, |m, &h| m.max(h))
    }

    /// First tooth index `>= from` whose height exceeds `level`.
    pub fn next_above(&self, from: usize, level: f64) -> Option<usize> {
        let n = self.heights.len();
        let mut i = from;
        while i < n && !i.is_multiple_of(BLOCK) {
            if self.heights[i] > level {
                return Some(i);
            }
            i += 1;
        }
        if i >= n {
            return None;
        }
        let mut b = i / BLOCK;
        while b < self.block_max.len() && self.block_max[b] <= level {
            b += 1;
        }
        let start = b * BLOCK;
        (start..n.min(start + BLOCK)).find(|&j| self.heights[j] > level)
    }

    pub fn distance(&self, s: f64, t: f64) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        2.0 * self.range_max(self.comb.teeth_up_to(s), self.comb.teeth_up_to(t))
    }
}

/// A partition of `{0, .., n-1}` into nonempty blocks.
///
/// Blocks are kept sorted internally and ordered by their smallest element,
/// so two partitions with the same blocks compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &mut blocks {
            if b.is_empty() {
                bail!(Validation, "empty block");
            }
            b.sort_unstable();
            for &i in b.iter() {
                if i >= n {
                    bail!(Validation, "index {i} outside 0..{n}");
                }
                if std::mem::replace(&mut seen[i], true) {
                    bail!(Validation, "index {i} appears in two blocks");
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            bail!(Validation, "index {i} is not covered");
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    /// Partition induced by equal labels.
    pub fn from_labels<L: Eq + std::hash::Hash>(labels: &[L]) -> Self {
        let mut index = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let b = *index.entry(l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
        }
        Self { n: labels.len(), blocks }
    }

    pub fn empty() -> Self {
        Self { n: 0, blocks: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(Vec::len)
    }

    /// Block label of every element.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &i in block {
                out[i] = b;
            }
        }
        out
    }

    /// True if every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n != coarser.n {
            return false;
        }
        let labels = coarser.labels();
        self.blocks.iter().all(|b| b.iter().all(|&i| labels[i] == labels[b[0]]))
    }
}

/// Partition of sample positions into balls of radius `r`: `i ~ j` iff their
/// comb distance is at most `r`.
pub fn ball_partition(c: &Comb, positions: &[f64], r: f64) -> Result<Partition> {
    if !(r > 0.0) {
        bail!(Domain, "radius must be positive, got {r}");
    }
    for &x in positions {
        c.check_position(x)?;
    }
    if positions.is_empty() {
        return Ok(Partition::empty());
    }
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&i, &j| positions[i].total_cmp(&positions[j]));
    // In an ultrametric on a line the distance of two sorted points is the
    // maximum of consecutive gaps, so balls are runs of sorted points.
    let mut labels = vec![0usize; positions.len()];
    let mut block = 0;
    for w in order.windows(2) {
        let d = c.max_between_right(positions[w[0]], positions[w[1]]) * 2.0;
        if d > r {
            block += 1;
        }
        labels[w[1]] = block;
    }
    labels[order[0]] = 0;
    Ok(Partition::from_labels(&labels))
}

impl Comb {
    /// Highest tooth in `(s, t]` for `s <= t` (the right-face convention).
    pub(crate) fn max_between_right(&self, s: f64, t: f64) -> f64 {
        self.max_over(self.teeth_up_to(s), self.teeth_up_to(t))
    }
}
