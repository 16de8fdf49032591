//! Neutral mutations on a comb: Poisson scattering, clades, allelic
//! partitions under the infinitely-many-alleles rule, and the clonal set.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::comb::{Comb, CombIndex, Partition};
use crate::error::{bail, Result};
use crate::intensity::IntensityModel;
use crate::quad::{integrate, integrate_to_inf};
use crate::samplers::RandomSource;

/// Mutation rate along lineages, given by μ̲(t) = μ([0, t]).
#[derive(Clone)]
pub struct MutationMeasure {
    kind: MeasureKind,
}

#[derive(Clone)]
enum MeasureKind {
    Uniform(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for MutationMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MeasureKind::Uniform(t) => write!(f, "MutationMeasure::Uniform({t})"),
            MeasureKind::Custom(_) => write!(f, "MutationMeasure::Custom"),
        }
    }
}

impl MutationMeasure {
    /// μ(dx) = θ dx.
    pub fn uniform(theta: f64) -> Self {
        Self { kind: MeasureKind::Uniform(theta) }
    }

    /// Any nondecreasing cumulative function with μ̲(0) = 0.
    pub fn custom(cumulative: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: MeasureKind::Custom(Arc::new(cumulative)) }
    }

    pub fn theta(&self) -> Option<f64> {
        match self.kind {
            MeasureKind::Uniform(t) => Some(t),
            MeasureKind::Custom(_) => None,
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        match &self.kind {
            MeasureKind::Uniform(theta) => theta * t,
            MeasureKind::Custom(f) => f(t),
        }
    }

    /// The t with μ̲(t) = m.
    pub fn inverse(&self, m: f64) -> f64 {
        match &self.kind {
            MeasureKind::Uniform(theta) => m / theta,
            MeasureKind::Custom(f) => {
                let (mut lo, mut hi) = (0.0, 1.0);
                while f(hi) < m && hi < 1e300 {
                    lo = hi;
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < m {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-13 * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        match &self.kind {
            MeasureKind::Uniform(theta) => *theta,
            MeasureKind::Custom(f) => {
                let d = 1e-6 * t.abs().max(1e-6);
                (f(t + d) - f((t - d).max(0.0))) / (t + d - (t - d).max(0.0))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, MeasureKind::Uniform(t) if t == 0.0)
    }
}

/// Branch carrying a mutation: the origin branch or the lineage of a tooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    Origin,
    Tooth(usize),
}

impl Serialize for Branch {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Branch::Origin => s.serialize_str("origin"),
            Branch::Tooth(i) => s.serialize_u64(*i as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Branch {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Index(usize),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(Branch::Tooth(i)),
            Raw::Name(s) if s == "origin" => Ok(Branch::Origin),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("unknown branch '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mutation {
    pub branch: Branch,
    pub depth: f64,
}

/// Mutations on a comb, sorted by branch (origin first) then depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MutationSet {
    atoms: Vec<Mutation>,
}

impl MutationSet {
    pub fn empty() -> Self {
        Self { atoms: Vec::new() }
    }

    /// Validates `atoms` against `c` and sorts them.
    pub fn new(c: &Comb, mut atoms: Vec<Mutation>) -> Result<Self> {
        for m in &atoms {
            let height = match m.branch {
                Branch::Origin => c.origin_height(),
                Branch::Tooth(i) if i < c.n_teeth() => c.teeth()[i].h,
                Branch::Tooth(i) => bail!(Validation, "mutation on tooth {i} of a comb with {} teeth", c.n_teeth()),
            };
            if !(m.depth > 0.0 && m.depth < height) {
                bail!(Validation, "mutation depth {} outside (0, {height}) on {:?}", m.depth, m.branch);
            }
        }
        sort_atoms(&mut atoms);
        let mut depths: Vec<f64> = atoms.iter().map(|m| m.depth).collect();
        depths.sort_by(f64::total_cmp);
        if depths.windows(2).any(|w| w[0] == w[1]) {
            bail!(Validation, "two mutations share the same depth");
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Mutation] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Same set with one more atom (validated).
    pub fn with(&self, c: &Comb, m: Mutation) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        atoms.push(m);
        Self::new(c, atoms)
    }
}

fn sort_atoms(atoms: &mut [Mutation]) {
    atoms.sort_by(|a, b| a.branch.cmp(&b.branch).then(a.depth.total_cmp(&b.depth)));
}

/// Poisson mutations with intensity μ(dy) along each tooth lineage and,
/// if `include_origin`, along the origin branch.
pub fn scatter_mutations(
    c: &Comb,
    mu: &MutationMeasure,
    include_origin: bool,
    rng: &mut RandomSource,
) -> Result<MutationSet> {
    if mu.is_zero() {
        return Ok(MutationSet::empty());
    }
    let mut branches: Vec<(Branch, f64)> = Vec::with_capacity(c.n_teeth() + 1);
    if include_origin {
        branches.push((Branch::Origin, c.origin_height()));
    }
    branches.extend(c.teeth().iter().enumerate().map(|(i, t)| (Branch::Tooth(i), t.h)));
    let mut cum = Vec::with_capacity(branches.len());
    let mut total = 0.0;
    for &(b, h) in &branches {
        let m = mu.cumulative(h);
        if !(m.is_finite() && m >= 0.0) {
            bail!(Domain, "mutation measure is not finite on {b:?} (height {h})");
        }
        total += m;
        cum.push(total);
    }
    let count = if total > 0.0 { Poisson::new(total).expect("positive mean").sample(rng) as usize } else { 0 };
    let mut atoms = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.random::<f64>() * total;
        let k = cum.partition_point(|&x| x <= u).min(branches.len() - 1);
        let (branch, h) = branches[k];
        let depth = mu.inverse(rng.random::<f64>() * mu.cumulative(h));
        if depth > 0.0 && depth < h {
            atoms.push(Mutation { branch, depth });
        }
    }
    sort_atoms(&mut atoms);
    Ok(MutationSet { atoms })
}

/// Carriers `[start, end)` of one mutation. When `end` is the end of the
/// interval the endpoint is a carrier too; `contains` tests the half-open
/// interval only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CladeInterval {
    pub mutation: usize,
    pub start: f64,
    pub end: f64,
}

impl CladeInterval {
    pub fn measure(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x < self.end
    }
}

/// Clade of `m`: from its branch position to the first tooth on the right
/// higher than the mutation depth (or the end of the interval).
pub fn mutation_clade(idx: &CombIndex<'_>, m: &Mutation, id: usize) -> CladeInterval {
    let c = idx.comb();
    let (start, from) = match m.branch {
        Branch::Origin => (0.0, 0),
        Branch::Tooth(i) => (c.teeth()[i].pos, i + 1),
    };
    let end = idx.next_above(from, m.depth).map_or(c.interval_length(), |j| c.teeth()[j].pos);
    CladeInterval { mutation: id, start, end }
}

pub fn clades(c: &Comb, ms: &MutationSet) -> Vec<CladeInterval> {
    let idx = CombIndex::new(c);
    ms.atoms.iter().enumerate().map(|(i, m)| mutation_clade(&idx, m, i)).collect()
}

/// Allelic partition of a sample with the allele of every sampled point:
/// the index of its most recent mutation, or `None` for the clonal type.
#[derive(Debug, Clone, PartialEq)]
pub struct AllelicPartition {
    pub partition: Partition,
    pub alleles: Vec<Option<usize>>,
}

/// Assigns each sample position the covering mutation of smallest depth.
pub fn assign_alleles(c: &Comb, ms: &MutationSet, positions: &[f64]) -> Result<AllelicPartition> {
    for &x in positions {
        if !(0.0..=c.interval_length()).contains(&x) {
            bail!(Domain, "sample position {x} outside [0, {}]", c.interval_length());
        }
    }
    let alleles = assign_sorted(c, ms, positions);
    let partition = Partition::from_labels(&alleles);
    Ok(AllelicPartition { partition, alleles })
}

fn assign_sorted(c: &Comb, ms: &MutationSet, positions: &[f64]) -> Vec<Option<usize>> {
    let n = positions.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| positions[i].total_cmp(&positions[j]));
    let sorted: Vec<f64> = order.iter().map(|&i| positions[i]).collect();
    let cl = clades(c, ms);
    let mut by_depth: Vec<usize> = (0..ms.len()).collect();
    by_depth.sort_by(|&a, &b| ms.atoms[a].depth.total_cmp(&ms.atoms[b].depth));

    // next[i]: smallest unassigned sorted index >= i (path-halving find).
    let mut next: Vec<usize> = (0..=n).collect();
    fn find(next: &mut [usize], mut i: usize) -> usize {
        while next[i] != i {
            next[i] = next[next[i]];
            i = next[i];
        }
        i
    }
    let mut out = vec![None; n];
    for m in by_depth {
        let cl = cl[m];
        let lo = sorted.partition_point(|&x| x < cl.start);
        // A clade reaching the end of the interval also holds its endpoint.
        let hi = if cl.end >= c.interval_length() { n } else { sorted.partition_point(|&x| x < cl.end) };
        let mut j = find(&mut next, lo);
        while j < hi {
            out[order[j]] = Some(m);
            next[j] = j + 1;
            j = find(&mut next, j + 1);
        }
    }
    out
}

/// Finite union of disjoint half-open intervals `[lo, hi)` of `[0, a]`;
/// a last interval ending at `a` also contains `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClonalSet {
    pub intervals: Vec<(f64, f64)>,
    pub interval_length: f64,
}

impl ClonalSet {
    pub fn contains(&self, x: f64) -> bool {
        let k = self.intervals.partition_point(|&(lo, _)| lo <= x);
        if k == 0 {
            return false;
        }
        let (_, hi) = self.intervals[k - 1];
        x < hi || (x == hi && hi == self.interval_length)
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Whether `[0, t]` lies inside the set.
    pub fn covers_prefix(&self, t: f64) -> bool {
        self.intervals.first().is_some_and(|&(lo, hi)| {
            lo == 0.0 && (t < hi || (t == hi && hi == self.interval_length))
        })
    }

    pub fn is_subset_of(&self, other: &ClonalSet) -> bool {
        self.intervals.iter().all(|&(lo, hi)| {
            other.intervals.iter().any(|&(a, b)| a <= lo && hi <= b)
        })
    }
}

/// Points of `[0, a]` outside every clade.
pub fn clonal_set(c: &Comb, ms: &MutationSet) -> ClonalSet {
    let mut cl: Vec<(f64, f64)> = clades(c, ms).iter().map(|k| (k.start, k.end)).collect();
    cl.sort_by(|a, b| a.0.total_cmp(&b.0));
    let a = c.interval_length();
    let mut intervals = Vec::new();
    let mut cursor = 0.0;
    for (lo, hi) in cl {
        if lo > cursor {
            intervals.push((cursor, lo));
        }
        cursor = f64::max(cursor, hi);
    }
    if cursor < a {
        intervals.push((cursor, a));
    }
    ClonalSet { intervals, interval_length: a }
}

/// Laplace exponent of the clonal subordinator:
/// 1/φ(λ) = ∫ e^{−μ̲(x)} / (λ + ν̄(x)) μ(dx).
pub fn clonal_laplace_exponent(nu: &IntensityModel, mu: &MutationMeasure, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        bail!(Domain, "λ must be positive, got {lambda}");
    }
    let inv = match mu.theta() {
        // Substituting u = θx keeps the integrand bounded by e^{−u}/λ.
        Some(theta) if theta > 0.0 => integrate_to_inf(
            |u| (-u).exp() / (lambda + nu.tail(u / theta)),
            0.0,
            1e-12,
            1e-300,
        )?,
        Some(_) => bail!(Domain, "the mutation measure is zero; φ is infinite"),
        None => integrate_to_inf(
            |x| (-mu.cumulative(x)).exp() * mu.density(x) / (lambda + nu.tail(x)),
            0.0,
            1e-12,
            1e-300,
        )?,
    };
    if !(inv.is_finite() && inv > 0.0) {
        bail!(Numeric, "1/φ({lambda}) evaluated to {inv}; the integral diverges or vanishes");
    }
    Ok(1.0 / inv)
}

/// ∫_{[lo, hi)} (1 − e^{−μ̲(x)}) ν(dx), the rate per unit width at which
/// teeth carry at least one mutation.
pub fn clonal_interval_exponent(nu: &IntensityModel, mu: &MutationMeasure, lo: f64, hi: f64) -> Result<f64> {
    // Integration by parts against ν̄ avoids differentiating the tail.
    let g = |x: f64| 1.0 - (-mu.cumulative(x)).exp();
    let boundary = g(lo) * nu.tail(lo) - g(hi) * nu.tail(hi);
    let boundary = if boundary.is_nan() { 0.0 } else { boundary };
    let f = |x: f64| (-mu.cumulative(x)).exp() * mu.density(x) * nu.tail(x);
    let body = if hi.is_infinite() {
        integrate_to_inf(f, lo, 1e-12, 1e-300)?
    } else {
        integrate(f, lo, hi, 1e-12, 1e-300)?
    };
    let v = boundary + body;
    if !v.is_finite() {
        bail!(Numeric, "clonal interval exponent diverges on [{lo}, {hi})");
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::replicate;
    use crate::special::exp_integral_e1;

    fn fixture() -> Comb {
        Comb::from_parts(1.0, 4.0, &[0.2, 0.5, 0.8], &[3.0, 1.0, 2.0]).unwrap()
    }

    /// Allele of `x` by walking its lineage upward through the teeth.
    fn lineage_walk(c: &Comb, ms: &MutationSet, x: f64) -> Option<usize> {
        let teeth = c.teeth();
        let mut k = teeth.iter().rposition(|t| t.pos <= x);
        let mut level = 0.0;
        loop {
            let (branch, top) = match k {
                Some(i) => (Branch::Tooth(i), teeth[i].h),
                None => (Branch::Origin, c.origin_height()),
            };
            if top > level {
                let hit = ms
                    .atoms()
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| m.branch == branch && m.depth >= level && m.depth < top)
                    .min_by(|a, b| a.1.depth.total_cmp(&b.1.depth));
                if let Some((id, _)) = hit {
                    return Some(id);
                }
                level = top;
            }
            let i = k?;
            k = teeth[..i].iter().rposition(|t| t.h > level);
        }
    }

    #[test]
    fn fixture_clade() {
        let c = fixture();
        let ms = MutationSet::new(&c, vec![Mutation { branch: Branch::Tooth(1), depth: 0.7 }]).unwrap();
        let cl = clades(&c, &ms);
        assert_eq!((cl[0].start, cl[0].end), (0.5, 0.8));
        let cs = clonal_set(&c, &ms);
        assert_eq!(cs.intervals, vec![(0.0, 0.5), (0.8, 1.0)]);
        assert!(cs.contains(1.0) && !cs.contains(0.5) && cs.contains(0.8));
    }

    #[test]
    fn origin_mutation_covers_everything() {
        let c = fixture();
        let ms = MutationSet::new(&c, vec![Mutation { branch: Branch::Origin, depth: 3.5 }]).unwrap();
        let cl = clades(&c, &ms);
        assert_eq!((cl[0].start, cl[0].end), (0.0, 1.0));
        let ap = assign_alleles(&c, &ms, &[0.1, 0.4, 0.9]).unwrap();
        assert_eq!(ap.partition.n_blocks(), 1);
        assert_eq!(ap.alleles, vec![Some(0); 3]);
        assert!(clonal_set(&c, &ms).intervals.is_empty());
    }

    #[test]
    fn no_mutations_is_clonal() {
        let c = fixture();
        let ms = MutationSet::empty();
        let ap = assign_alleles(&c, &ms, &[0.1, 0.4, 0.9]).unwrap();
        assert_eq!(ap.alleles, vec![None; 3]);
        assert_eq!(clonal_set(&c, &ms).intervals, vec![(0.0, 1.0)]);
        let mut rng = RandomSource::new(0);
        assert!(scatter_mutations(&c, &MutationMeasure::uniform(0.0), true, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn nested_clades() {
        let c = fixture();
        let ms = MutationSet::new(
            &c,
            vec![
                Mutation { branch: Branch::Tooth(0), depth: 2.5 },
                Mutation { branch: Branch::Tooth(1), depth: 0.5 },
            ],
        )
        .unwrap();
        let pts = [0.1, 0.3, 0.6, 0.9];
        let ap = assign_alleles(&c, &ms, &pts).unwrap();
        assert_eq!(ap.alleles, vec![None, Some(0), Some(1), Some(0)]);
        for &x in &pts {
            assert_eq!(lineage_walk(&c, &ms, x), ap.alleles[pts.iter().position(|&y| y == x).unwrap()]);
        }
    }

    #[test]
    fn bad_atoms_rejected() {
        let c = fixture();
        assert!(MutationSet::new(&c, vec![Mutation { branch: Branch::Tooth(1), depth: 1.5 }]).is_err());
        assert!(MutationSet::new(&c, vec![Mutation { branch: Branch::Tooth(7), depth: 0.5 }]).is_err());
        let dup = vec![
            Mutation { branch: Branch::Tooth(0), depth: 0.5 },
            Mutation { branch: Branch::Tooth(2), depth: 0.5 },
        ];
        assert!(MutationSet::new(&c, dup).is_err());
    }

    #[test]
    fn json_format() {
        let c = fixture();
        let ms = MutationSet::new(
            &c,
            vec![Mutation { branch: Branch::Tooth(2), depth: 1.5 }, Mutation { branch: Branch::Origin, depth: 3.5 }],
        )
        .unwrap();
        let s = serde_json::to_string(&ms).unwrap();
        assert_eq!(s, r#"[{"branch":"origin","depth":3.5},{"branch":2,"depth":1.5}]"#);
        assert_eq!(serde_json::from_str::<MutationSet>(&s).unwrap(), ms);
        assert!(serde_json::from_str::<MutationSet>(r#"[{"branch":"root","depth":1}]"#).is_err());
    }

    #[test]
    fn expected_atom_count() {
        let c = Comb::from_parts(1.0, 4.0, &[0.25, 0.5, 0.75], &[1.0, 2.0, 3.0]).unwrap();
        let mu = MutationMeasure::uniform(1.0);
        let reps = 100_000;
        let total: usize = replicate(17, reps, |r| scatter_mutations(&c, &mu, true, r).unwrap().len()).iter().sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - 10.0).abs() < 0.3, "mean count {mean}");
    }

    #[test]
    fn lineage_walk_agrees_on_random_instances() {
        let mu = MutationMeasure::uniform(0.8);
        let bad: usize = replicate(23, 1000, |r| {
            let n = r.random_range(0..=10);
            let pos: Vec<f64> = {
                let mut p: Vec<f64> = (0..n).map(|_| r.open01()).collect();
                p.sort_by(f64::total_cmp);
                p.dedup();
                p
            };
            let h: Vec<f64> = pos.iter().map(|_| 0.1 + 2.0 * r.random::<f64>()).collect();
            let c = Comb::from_parts(1.0, 3.0, &pos, &h).unwrap();
            let ms = scatter_mutations(&c, &mu, true, r).unwrap();
            let grid: Vec<f64> = (0..50).map(|_| r.random::<f64>()).collect();
            let ap = assign_alleles(&c, &ms, &grid).unwrap();
            let cs = clonal_set(&c, &ms);
            grid.iter()
                .zip(&ap.alleles)
                .filter(|(x, a)| lineage_walk(&c, &ms, **x) != **a || cs.contains(**x) != a.is_none())
                .count()
        })
        .iter()
        .sum();
        assert_eq!(bad, 0);
    }

    #[test]
    fn laplace_exponent_fixture() {
        let nu = IntensityModel::critical_birth_death(1.0).unwrap();
        let mu = MutationMeasure::uniform(1.0);
        let phi = clonal_laplace_exponent(&nu, &mu, 1.0).unwrap();
        let want = 1.0 / (1.0 - std::f64::consts::E.powi(2) * exp_integral_e1(2.0));
        assert!((phi - want).abs() < 1e-8 * want, "{phi} vs {want}");
        // Same value through the generic density path.
        let generic = MutationMeasure::custom(|x| x);
        let phi2 = clonal_laplace_exponent(&nu, &generic, 1.0).unwrap();
        assert!((phi2 - want).abs() < 1e-6 * want);
        let big = 1e6;
        let r = big / clonal_laplace_exponent(&nu, &mu, big).unwrap();
        assert!((r - 1.0).abs() < 1e-3);
    }

    #[test]
    fn laplace_exponent_scaling_identity() {
        // Scaling μ by c equals replacing μ̲ by cμ̲ in the integral.
        let nu = IntensityModel::brownian(1.0).unwrap();
        let c = 2.5;
        let direct = clonal_laplace_exponent(&nu, &MutationMeasure::uniform(c), 0.7).unwrap();
        let manual = integrate_to_inf(|x| (-c * x).exp() * c / (0.7 + nu.tail(x)), 0.0, 1e-12, 1e-300).unwrap();
        assert!((direct - 1.0 / manual).abs() < 1e-9 * direct);
    }

    #[test]
    fn interval_exponent_matches_closed_form() {
        let nu = IntensityModel::critical_birth_death(1.0).unwrap();
        let v = clonal_interval_exponent(&nu, &MutationMeasure::uniform(1.0), 0.0, f64::INFINITY).unwrap();
        let want = std::f64::consts::E * exp_integral_e1(1.0);
        assert!((v - want).abs() < 1e-6, "{v} vs {want}");
    }
}
