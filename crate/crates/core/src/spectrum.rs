//! Allele frequency spectra: the Ewens sampling formula, sample spectra from
//! Kingman combs, population spectra of combs and their Λ normalizations.

use rand::Rng;

use crate::comb::Partition;
use crate::error::{bail, Result};
use crate::intensity::IntensityModel;
use crate::mutation::{assign_alleles, clades, scatter_mutations, MutationMeasure, MutationSet};
use crate::samplers::{replicate, sample_cpp, KingmanSampler, RandomSource};
use crate::special::exp_integral_e1;
use crate::stats::Estimate;
use crate::Comb;

/// Largest sample size for exact partition sums.
pub const EXACT_SPECTRUM_MAX_N: usize = 12;

/// Allele counts `A(k)` of a sample, or the carrier measures of the alleles
/// of a whole population.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySpectrum {
    /// `counts[k - 1] = A(k)` for `k = 1..=n`.
    Sample { counts: Vec<usize> },
    /// One atom per allele, in decreasing order.
    Population { atoms: Vec<f64> },
}

impl FrequencySpectrum {
    pub fn from_atoms(mut atoms: Vec<f64>) -> Self {
        atoms.sort_by(|a, b| b.total_cmp(a));
        FrequencySpectrum::Population { atoms }
    }

    /// Σ k·A(k) in sample mode, total carrier measure in population mode.
    pub fn total(&self) -> f64 {
        match self {
            FrequencySpectrum::Sample { counts } => {
                counts.iter().enumerate().map(|(i, &a)| ((i + 1) * a) as f64).sum()
            }
            FrequencySpectrum::Population { atoms } => atoms.iter().sum(),
        }
    }

    pub fn n_alleles(&self) -> usize {
        match self {
            FrequencySpectrum::Sample { counts } => counts.iter().sum(),
            FrequencySpectrum::Population { atoms } => atoms.len(),
        }
    }

    /// Number of alleles of size at least `q`.
    pub fn tail_count(&self, q: f64) -> usize {
        match self {
            FrequencySpectrum::Sample { counts } => counts
                .iter()
                .enumerate()
                .filter(|&(i, _)| (i + 1) as f64 >= q)
                .map(|(_, &a)| a)
                .sum(),
            FrequencySpectrum::Population { atoms } => atoms.iter().filter(|&&x| x >= q).count(),
        }
    }

    /// `A(k)`; zero in population mode.
    pub fn count(&self, k: usize) -> usize {
        match self {
            FrequencySpectrum::Sample { counts } if k >= 1 => counts.get(k - 1).copied().unwrap_or(0),
            _ => 0,
        }
    }
}

pub fn spectrum_of_partition(p: &Partition) -> FrequencySpectrum {
    let mut counts = vec![0; p.n()];
    for s in p.block_sizes() {
        counts[s - 1] += 1;
    }
    FrequencySpectrum::Sample { counts }
}

/// Ewens sampling formula
/// P(A = a) = n!/(θ(θ+1)⋯(θ+n−1)) · ∏_k (θ/k)^{a_k} / a_k!.
///
/// `a[k - 1]` is the number of blocks of size `k`; trailing entries may be
/// omitted.
pub fn esf_probability(theta: f64, n: usize, a: &[usize]) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        bail!(Domain, "θ must be positive, got {theta}");
    }
    let total: usize = a.iter().enumerate().map(|(i, &ak)| (i + 1) * ak).sum();
    if total != n || n == 0 {
        bail!(Validation, "Σ k·a_k = {total} does not match n = {n}");
    }
    if n <= 170 {
        let mut p = 1.0;
        for i in 1..=n {
            p *= i as f64 / (theta + (i - 1) as f64);
        }
        for (i, &ak) in a.iter().enumerate() {
            let r = theta / (i + 1) as f64;
            for j in 1..=ak {
                p *= r / j as f64;
            }
        }
        return Ok(p);
    }
    let mut lp = ln_factorial(n);
    for i in 0..n {
        lp -= (theta + i as f64).ln();
    }
    for (i, &ak) in a.iter().enumerate() {
        if ak > 0 {
            lp += ak as f64 * (theta / (i + 1) as f64).ln() - ln_factorial(ak);
        }
    }
    Ok(lp.exp())
}

fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// All integer partitions of `n` as count vectors `a` with `a[k - 1] = A(k)`.
pub fn integer_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for k in (1..=max.min(rest)).rev() {
            cur[k - 1] += 1;
            rec(rest - k, k, cur, out);
            cur[k - 1] -= 1;
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    rec(n, n, &mut cur, &mut out);
    out
}

/// |Σ_a P(a) − 1| over all partitions of `n`.
pub fn esf_normalization_defect(theta: f64, n: usize) -> Result<f64> {
    let mut s = 0.0;
    for a in integer_partitions(n) {
        s += esf_probability(theta, n, &a)?;
    }
    Ok((s - 1.0).abs())
}

/// Exact E[A_n(k)] by summation over the partitions of `n`.
pub fn expected_sample_spectrum(theta: f64, n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        bail!(Domain, "block size k = {k} must lie in 1..={n}");
    }
    if n > EXACT_SPECTRUM_MAX_N {
        bail!(Domain, "exact spectrum limited to n ≤ {EXACT_SPECTRUM_MAX_N}, got {n}");
    }
    let mut m = 0.0;
    for a in integer_partitions(n) {
        if a[k - 1] > 0 {
            m += a[k - 1] as f64 * esf_probability(theta, n, &a)?;
        }
    }
    Ok(m)
}

/// Allelic partition of `n` individuals sampled from a Kingman coalescent.
///
/// The comb has `n − 1` teeth and no tail, so it is exactly the genealogy
/// of `n` leaves. θ is the Ewens parameter: with pairs coalescing at rate 1,
/// every lineage mutates at rate θ/2 per unit depth.
#[derive(Debug, Clone)]
pub struct KingmanSample {
    n: usize,
    theta: f64,
    sampler: Option<KingmanSampler>,
}

impl KingmanSample {
    pub fn new(n: usize, theta: f64) -> Result<Self> {
        if n == 0 {
            bail!(Domain, "sample size must be positive");
        }
        if !(theta > 0.0 && theta.is_finite()) {
            bail!(Domain, "θ must be positive, got {theta}");
        }
        let sampler = if n > 1 { Some(KingmanSampler::truncated(n - 1)?) } else { None };
        Ok(Self { n, theta, sampler })
    }

    pub fn partition(&self, rng: &mut RandomSource) -> Partition {
        let Some(sampler) = &self.sampler else {
            return Partition::from_labels(&[0]);
        };
        let c = sampler.sample(rng);
        let mu = MutationMeasure::uniform(self.theta / 2.0);
        let ms = scatter_mutations(&c, &mu, true, rng).expect("finite mutation measure");
        let ap = assign_alleles(&c, &ms, &c.leaf_midpoints()).expect("leaf midpoints lie in the interval");
        ap.partition
    }

    pub fn spectrum(&self, rng: &mut RandomSource) -> FrequencySpectrum {
        spectrum_of_partition(&self.partition(rng))
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Monte Carlo E[A_n(k)] from Kingman samples.
pub fn monte_carlo_sample_spectrum(theta: f64, n: usize, k: usize, reps: usize, seed: u64) -> Result<Estimate> {
    if k == 0 || k > n {
        bail!(Domain, "block size k = {k} must lie in 1..={n}");
    }
    let ks = KingmanSample::new(n, theta)?;
    let xs = replicate(seed, reps, |rng| ks.spectrum(rng).count(k) as f64);
    Ok(Estimate::from_samples(&xs))
}

/// Carrier ℓ-measures of the alleles of a comb: each clade minus the clades
/// of more recent mutations nested in it. Fully overwritten alleles give no
/// atom.
pub fn population_spectrum(c: &Comb, ms: &MutationSet) -> FrequencySpectrum {
    let cl = clades(c, ms);
    let mut order: Vec<usize> = (0..cl.len()).collect();
    order.sort_by(|&i, &j| {
        cl[i].start
            .total_cmp(&cl[j].start)
            .then(cl[j].end.total_cmp(&cl[i].end))
            .then(ms.atoms()[j].depth.total_cmp(&ms.atoms()[i].depth))
    });
    let mut covered = vec![0.0; cl.len()];
    let mut stack: Vec<usize> = Vec::new();
    for &i in &order {
        while let Some(&top) = stack.last() {
            if cl[top].end <= cl[i].start {
                stack.pop();
            } else {
                break;
            }
        }
        if let Some(&parent) = stack.last() {
            covered[parent] += cl[i].measure();
        }
        stack.push(i);
    }
    let tol = 1e-12 * c.interval_length();
    let atoms = (0..cl.len())
        .map(|i| cl[i].measure() - covered[i])
        .filter(|&x| x > tol)
        .collect();
    FrequencySpectrum::from_atoms(atoms)
}

/// Allele sizes counted in individuals: leaf `i` is represented by the
/// left end of its interval. The clonal type is not an allele.
pub fn population_counts(c: &Comb, ms: &MutationSet) -> FrequencySpectrum {
    let mut points = Vec::with_capacity(c.n_leaves());
    points.push(0.0);
    points.extend(c.teeth().iter().map(|t| t.pos));
    let ap = assign_alleles(c, ms, &points).expect("tooth positions lie in the interval");
    let mut sizes = vec![0usize; ms.len()];
    for m in ap.alleles.into_iter().flatten() {
        sizes[m] += 1;
    }
    FrequencySpectrum::from_atoms(sizes.into_iter().filter(|&s| s > 0).map(|s| s as f64).collect())
}

/// CPP models with a closed-form limit Λ of the normalized spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// ν̄(x) = 1/(1 + x); alleles are counted in individuals.
    CriticalBirthDeath,
    /// ν̄(x) = 1/x with teeth below `eps` dropped; alleles are ℓ-measures.
    Brownian { eps: f64 },
}

impl TailModel {
    pub fn intensity(&self) -> IntensityModel {
        match self {
            TailModel::CriticalBirthDeath => IntensityModel::CriticalBirthDeath { rate: 1.0 },
            TailModel::Brownian { .. } => IntensityModel::Brownian { c: 1.0 },
        }
    }

    fn eps(&self) -> f64 {
        match self {
            TailModel::CriticalBirthDeath => 0.0,
            TailModel::Brownian { eps } => *eps,
        }
    }

    fn spectrum(&self, c: &Comb, ms: &MutationSet) -> FrequencySpectrum {
        match self {
            TailModel::CriticalBirthDeath => population_counts(c, ms),
            TailModel::Brownian { .. } => population_spectrum(c, ms),
        }
    }

    /// Λ([q, ∞)).
    pub fn lambda_tail(&self, theta: f64, q: f64) -> f64 {
        match self {
            TailModel::CriticalBirthDeath => {
                let k0 = q.ceil().max(1.0) as usize;
                let r = 1.0 / (1.0 + theta);
                let mut s = 0.0;
                let mut p = r.powi(k0 as i32);
                for k in k0.. {
                    let term = theta / k as f64 * p;
                    s += term;
                    if term < 1e-17 * s {
                        break;
                    }
                    p *= r;
                }
                s
            }
            TailModel::Brownian { .. } => theta * exp_integral_e1(theta * q),
        }
    }

    /// Λ({k}) = (θ/k)(1 + θ)^{−k} in the counting model; zero otherwise.
    pub fn lambda_atom(&self, theta: f64, k: usize) -> f64 {
        match self {
            TailModel::CriticalBirthDeath if k >= 1 => theta / k as f64 * (1.0 + theta).powi(-(k as i32)),
            _ => 0.0,
        }
    }
}

/// One point of a normalized spectrum with its limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub q: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
}

/// Which statistic of the spectrum to normalize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumQuery {
    /// Alleles of size at least q.
    Tail(f64),
    /// Alleles of size exactly k (counting model).
    Exactly(usize),
}

/// Ratio-of-means estimates of (#alleles matching each query)/a(T) over
/// CPPs of height `t_max` with mutation rate θ.
pub fn normalized_spectrum(
    model: TailModel,
    theta: f64,
    t_max: f64,
    queries: &[SpectrumQuery],
    reps: usize,
    seed: u64,
) -> Result<Vec<TailEstimate>> {
    if !(theta > 0.0 && theta.is_finite()) {
        bail!(Domain, "θ must be positive, got {theta}");
    }
    if reps < 2 {
        bail!(Validation, "need at least two replicates");
    }
    let nu = model.intensity();
    let mu = MutationMeasure::uniform(theta);
    sample_cpp(&nu, t_max, model.eps(), &mut RandomSource::new(seed))?;
    let runs: Vec<(f64, Vec<f64>)> = replicate(seed, reps, |rng| {
        let cpp = sample_cpp(&nu, t_max, model.eps(), rng).expect("validated parameters");
        let ms = scatter_mutations(&cpp.comb, &mu, true, rng).expect("finite mutation measure");
        let sp = model.spectrum(&cpp.comb, &ms);
        let counts = queries
            .iter()
            .map(|q| match *q {
                SpectrumQuery::Tail(q) => sp.tail_count(q) as f64,
                SpectrumQuery::Exactly(k) => match &sp {
                    FrequencySpectrum::Population { atoms } => {
                        atoms.iter().filter(|&&x| x == k as f64).count() as f64
                    }
                    FrequencySpectrum::Sample { .. } => sp.count(k) as f64,
                },
            })
            .collect();
        (cpp.width, counts)
    });
    let widths: Vec<f64> = runs.iter().map(|r| r.0).collect();
    Ok(queries
        .iter()
        .enumerate()
        .map(|(j, q)| {
            let xs: Vec<f64> = runs.iter().map(|r| r.1[j]).collect();
            let e = Estimate::ratio(&xs, &widths);
            let (q, target) = match *q {
                SpectrumQuery::Tail(q) => (q, model.lambda_tail(theta, q)),
                SpectrumQuery::Exactly(k) => (k as f64, model.lambda_atom(theta, k)),
            };
            TailEstimate { q, estimate: e.mean, stderr: e.stderr, target }
        })
        .collect())
}

/// Estimates of Ā_T(q)/a(T) on a grid of q.
pub fn normalized_tail_spectrum(
    model: TailModel,
    theta: f64,
    t_max: f64,
    qs: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<TailEstimate>> {
    let queries: Vec<SpectrumQuery> = qs.iter().map(|&q| SpectrumQuery::Tail(q)).collect();
    normalized_spectrum(model, theta, t_max, &queries, reps, seed)
}

/// Ranked stick-breaking fractions P_k = Z_k ∏_{i<k}(1 − Z_i) with
/// Z ~ Beta(1, θ), truncated after `depth` sticks.
pub fn gem_ranked(theta: f64, depth: usize, rng: &mut RandomSource) -> Vec<f64> {
    let mut rest = 1.0;
    let mut out: Vec<f64> = (0..depth)
        .map(|_| {
            let u: f64 = rng.random();
            let z = 1.0 - (1.0 - u).powf(1.0 / theta);
            let p = z * rest;
            rest -= p;
            p
        })
        .collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

pub fn gem_ranked_oracle(theta: f64, depth: usize, reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(theta > 0.0 && theta.is_finite()) {
        bail!(Domain, "θ must be positive, got {theta}");
    }
    Ok(replicate(seed, reps, |rng| gem_ranked(theta, depth, rng)))
}
