//! Random and deterministic combs: Kingman comb, coalescent point processes,
//! the p-adic comb, splitting trees and the rescaling operator.

use rand::{Rng, RngCore, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, Gamma, Open01, Poisson};
use rayon::prelude::*;

use crate::comb::{Comb, Tooth};
use crate::error::{bail, Result};
use crate::intensity::{BirthRate, IntensityModel, Lifetime, PopulationModel};
use crate::tree::Tree;

/// Seeded ChaCha8 stream. Replicate `i` of a run reads stream `i` of the
/// run's seed, so results do not depend on how replicates are scheduled.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::for_replicate(seed, 0)
    }

    pub fn for_replicate(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng, seed, stream: index }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        Open01.sample(self)
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Runs `reps` replicates in parallel, replicate `i` on stream `i` of `seed`,
/// and returns the results in replicate order.
pub fn replicate<T, F>(seed: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RandomSource) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|i| f(&mut RandomSource::for_replicate(seed, i as u64)))
        .collect()
}

/// `n` sorted uniforms on (0, len) from exponential spacings.
fn sorted_uniforms(n: usize, len: f64, rng: &mut RandomSource) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            acc += e;
            acc
        })
        .collect();
    let e: f64 = Exp1.sample(rng);
    let total = acc + e;
    for x in &mut out {
        *x = *x / total * len;
    }
    out
}

fn teeth_from(positions: Vec<f64>, heights: Vec<f64>) -> Vec<Tooth> {
    positions.into_iter().zip(heights).map(|(pos, h)| Tooth { pos, h }).collect()
}

/// Kingman comb sampler for a fixed number of teeth.
///
/// τ_j = Σ_{k>j} e_k with e_k ~ Exp(k(k−1)/2). The sum is simulated exactly
/// up to k = n + 1; the remainder Σ_{k>n+1} e_k is drawn from the Gamma law
/// with the same mean and variance.
#[derive(Debug, Clone)]
pub struct KingmanSampler {
    n: usize,
    tail: Option<Gamma<f64>>,
}

impl KingmanSampler {
    pub fn new(n_teeth: usize) -> Result<Self> {
        if n_teeth == 0 {
            bail!(Validation, "Kingman comb needs at least one tooth");
        }
        Ok(Self { n: n_teeth, tail: Self::tail_law(n_teeth + 1) })
    }

    /// Exact sums only, no tail (τ_j then has mean 2/j − 2/(n+1)).
    pub fn truncated(n_teeth: usize) -> Result<Self> {
        let mut s = Self::new(n_teeth)?;
        s.tail = None;
        Ok(s)
    }

    fn tail_law(k_max: usize) -> Option<Gamma<f64>> {
        let mean = 2.0 / k_max as f64;
        let mut var = 0.0;
        let stop = k_max + 2000;
        for k in (k_max + 1)..=stop {
            let m = 2.0 / (k as f64 * (k as f64 - 1.0));
            var += m * m;
        }
        var += 4.0 / (3.0 * (stop as f64 + 0.5).powi(3));
        Gamma::new(mean * mean / var, var / mean).ok()
    }

    pub fn n_teeth(&self) -> usize {
        self.n
    }

    /// Heights τ_1 > … > τ_n.
    pub fn sample_heights(&self, rng: &mut RandomSource) -> Vec<f64> {
        let n = self.n;
        let mut tau = vec![0.0; n];
        let mut acc = self.tail.as_ref().map_or(0.0, |g| g.sample(rng));
        // e_{n+1} first, down to e_2.
        for j in (1..=n).rev() {
            let k = (j + 1) as f64;
            let e: f64 = Exp1.sample(rng);
            acc += e * 2.0 / (k * (k - 1.0));
            tau[j - 1] = acc;
        }
        tau
    }

    pub fn sample(&self, rng: &mut RandomSource) -> Comb {
        let mut heights = self.sample_heights(rng);
        let origin = heights[0] + 1.0;
        heights.shuffle(rng);
        let positions = sorted_uniforms(self.n, 1.0, rng);
        Comb::new(1.0, origin, teeth_from(positions, heights))
            .expect("sampled Kingman comb is valid")
    }
}

pub fn sample_kingman_comb(n_teeth: usize, rng: &mut RandomSource) -> Result<Comb> {
    Ok(KingmanSampler::new(n_teeth)?.sample(rng))
}

/// A CPP with height T killed at its first atom above T.
#[derive(Debug, Clone)]
pub struct CppSample {
    pub comb: Comb,
    pub width: f64,
    /// Height of the killing atom, when the model resolves heights above T.
    pub killing_height: Option<f64>,
}

/// Samples a CPP of height `t_max` with teeth below `eps` discarded: the
/// width is Exp(ν̄(T)), the tooth count Poisson(D·(ν̄(ε) − ν̄(T))), positions
/// are uniform and heights follow ν restricted to [ε, T).
pub fn sample_cpp(m: &IntensityModel, t_max: f64, eps: f64, rng: &mut RandomSource) -> Result<CppSample> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        bail!(Domain, "CPP height must be positive, got {t_max}");
    }
    if !(eps >= 0.0 && eps < t_max) {
        bail!(Domain, "truncation ε = {eps} must lie in [0, T)");
    }
    let (top, bottom) = (m.tail(eps), m.tail(t_max));
    if !top.is_finite() {
        bail!(Domain, "ν̄(ε) is not finite at ε = {eps} for the {} model", m.name());
    }
    if !(bottom > 0.0) {
        bail!(Domain, "ν̄(T) must be positive for the width to be finite");
    }
    let width: f64 = Exp::new(bottom).expect("positive rate").sample(rng);
    let mean = width * (top - bottom);
    let count = if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(rng) as usize } else { 0 };
    let positions = sorted_uniforms(count, width, rng);
    let heights = (0..count).map(|_| m.sample_height(eps, t_max, rng.random::<f64>())).collect();
    let killing = {
        let x = m.tail_inverse(bottom * rng.open01());
        (x > t_max).then_some(x)
    };
    let comb = Comb::with_truncation(width, t_max, teeth_from(positions, heights), eps)?;
    Ok(CppSample { comb, width, killing_height: killing })
}

/// Largest p^depth accepted by [`padic_comb`].
pub const PADIC_MAX_CELLS: u64 = 1 << 24;

/// The p-adic comb truncated at `depth`: a tooth of height p^{−n} at every
/// k·p^{−n} in (0, 1) with k prime to p, for n ≤ depth.
pub fn padic_comb(p: u64, depth: u32) -> Result<Comb> {
    if p < 2 || depth < 1 {
        bail!(Domain, "p-adic comb needs p ≥ 2 and depth ≥ 1 (got p = {p}, depth = {depth})");
    }
    let cells = p.checked_pow(depth).filter(|&c| c <= PADIC_MAX_CELLS);
    let Some(cells) = cells else {
        bail!(Resource, "{p}^{depth} cells exceed the limit of {PADIC_MAX_CELLS}");
    };
    let inv_p = 1.0 / p as f64;
    let teeth = (1..cells)
        .map(|m| {
            let mut v = 0;
            let mut k = m;
            while k % p == 0 {
                k /= p;
                v += 1;
            }
            Tooth { pos: m as f64 / cells as f64, h: inv_p.powi((depth - v) as i32) }
        })
        .collect();
    Comb::new(1.0, 1.0, teeth)
}

/// Midpoint of the depth-`digits.len()` cell of [0, 1] whose base-p
/// expansion starts with `digits`.
pub fn padic_cell_midpoint(p: u64, digits: &[u64]) -> f64 {
    let mut x = 0.0;
    let mut scale = 1.0;
    for &d in digits {
        scale /= p as f64;
        x += d as f64 * scale;
    }
    x + 0.5 * scale
}

/// One individual of a splitting tree. `death` is infinite for immortals.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub birth: f64,
    pub death: f64,
    pub parent: Option<usize>,
    /// Daughters in order of birth.
    pub daughters: Vec<usize>,
}

/// Full genealogy of a splitting population observed up to `horizon`.
#[derive(Debug, Clone)]
pub struct SplittingTree {
    pub individuals: Vec<Individual>,
    pub horizon: f64,
}

pub const MAX_INDIVIDUALS: usize = 10_000_000;

impl SplittingTree {
    pub fn is_alive(&self, i: usize) -> bool {
        self.individuals[i].death > self.horizon
    }

    /// Alive individuals in planar order: each mother before her daughters,
    /// daughters from youngest to oldest.
    pub fn survivors(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            if self.is_alive(i) {
                out.push(i);
            }
            stack.extend(self.individuals[i].daughters.iter().copied());
        }
        out
    }

    /// The genealogy as an edge-lengthed tree with depth = time. Branches stop
    /// at death or at the horizon; survivors are labelled by their index. At
    /// each birth the mother's continuation is the first child.
    pub fn to_tree(&self) -> Tree {
        let mut tree = Tree::with_root(0.0);
        let mut stack = vec![(0usize, tree.root())];
        while let Some((i, mut node)) = stack.pop() {
            let ind = &self.individuals[i];
            for &d in &ind.daughters {
                node = tree.add_child(node, self.individuals[d].birth, None);
                stack.push((d, node));
            }
            let end = ind.death.min(self.horizon);
            let label = self.is_alive(i).then(|| i.to_string());
            tree.add_child(node, end, label);
        }
        tree
    }
}

/// Simulates a splitting tree from one individual born at time 0: births at
/// rate b(t) during life, lifetimes i.i.d. Reruns until at least one
/// individual is alive at `horizon`.
pub fn sample_splitting_tree(
    m: &PopulationModel,
    horizon: f64,
    max_retries: usize,
    rng: &mut RandomSource,
) -> Result<SplittingTree> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        bail!(Domain, "horizon must be positive, got {horizon}");
    }
    let b_max = match &m.birth_rate {
        BirthRate::Constant(b) => *b,
        BirthRate::Grid { grid } => grid.iter().fold(0.0, |a: f64, &(_, b)| a.max(b)),
    };
    if !(b_max >= 0.0 && b_max.is_finite()) {
        bail!(Domain, "birth rate must be a nonnegative number");
    }
    for _ in 0..=max_retries {
        let t = simulate_once(m, b_max, horizon, rng)?;
        if t.individuals.iter().any(|i| i.death > horizon) {
            return Ok(t);
        }
    }
    bail!(Resource, "population went extinct before T = {horizon} in {} attempts", max_retries + 1)
}

fn simulate_once(m: &PopulationModel, b_max: f64, horizon: f64, rng: &mut RandomSource) -> Result<SplittingTree> {
    let lifetime = |rng: &mut RandomSource| -> f64 {
        match m.lifetime {
            Lifetime::Immortal => f64::INFINITY,
            Lifetime::Exponential(r) => Exp::new(r).expect("positive rate").sample(rng),
            Lifetime::Fixed(l) => l,
        }
    };
    let mut inds = vec![Individual { birth: 0.0, death: lifetime(rng), parent: None, daughters: Vec::new() }];
    let mut next = 0;
    while next < inds.len() {
        let (birth, death) = (inds[next].birth, inds[next].death);
        let end = death.min(horizon);
        let mut t = birth;
        if b_max > 0.0 {
            loop {
                let e: f64 = Exp1.sample(rng);
                t += e / b_max;
                if t >= end {
                    break;
                }
                if let BirthRate::Grid { .. } = m.birth_rate {
                    if rng.random::<f64>() * b_max > m.birth_rate.at(t) {
                        continue;
                    }
                }
                if inds.len() >= MAX_INDIVIDUALS {
                    bail!(Resource, "splitting tree exceeded {MAX_INDIVIDUALS} individuals");
                }
                let id = inds.len();
                let d = t + lifetime(rng);
                inds.push(Individual { birth: t, death: d, parent: Some(next), daughters: Vec::new() });
                inds[next].daughters.push(id);
            }
        }
        next += 1;
    }
    Ok(SplittingTree { individuals: inds, horizon })
}

/// Comb of the reduced tree at the horizon: consecutive survivors in planar
/// order are separated by a tooth at their coalescence depth, one unit of
/// width per survivor, origin height T.
pub fn reduce_population_tree(st: &SplittingTree) -> Result<Comb> {
    let horizon = st.horizon;
    let mut positions = Vec::new();
    let mut heights = Vec::new();
    let mut seen = 0usize;
    let mut trough = f64::INFINITY;
    // Stack entries: (individual, birth time of the branch point entered).
    let mut stack: Vec<usize> = vec![0];
    while let Some(i) = stack.pop() {
        let ind = &st.individuals[i];
        trough = trough.min(ind.birth);
        if st.is_alive(i) {
            if seen > 0 {
                positions.push(seen as f64);
                heights.push(horizon - trough);
            }
            seen += 1;
            trough = f64::INFINITY;
        }
        stack.extend(ind.daughters.iter().copied());
    }
    if seen == 0 {
        bail!(Domain, "no individual is alive at T = {horizon}");
    }
    Comb::new(seen as f64, horizon, teeth_from(positions, heights))
}

/// Zoom onto [0, ε]: keeps teeth at positions below ε and divides positions
/// and heights by ε.
pub fn rescale_comb(c: &Comb, eps: f64) -> Result<Comb> {
    if !(eps > 0.0 && eps <= 1.0) {
        bail!(Domain, "rescaling factor must lie in (0, 1], got {eps}");
    }
    let len = c.interval_length().min(eps);
    let teeth = c
        .teeth()
        .iter()
        .take_while(|t| t.pos < len)
        .map(|t| Tooth { pos: t.pos / eps, h: t.h / eps })
        .collect();
    Comb::with_truncation(len / eps, c.origin_height() / eps, teeth, c.truncation() / eps)
}

/// Inverse of [`rescale_comb`] on the retained teeth.
pub fn unscale_comb(c: &Comb, eps: f64) -> Result<Comb> {
    if !(eps > 0.0 && eps <= 1.0) {
        bail!(Domain, "rescaling factor must lie in (0, 1], got {eps}");
    }
    let teeth = c.teeth().iter().map(|t| Tooth { pos: t.pos * eps, h: t.h * eps }).collect();
    Comb::with_truncation(c.interval_length() * eps, c.origin_height() * eps, teeth, c.truncation() * eps)
}
