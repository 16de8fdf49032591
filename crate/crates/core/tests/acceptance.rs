//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use rand::Rng;
use ultracomb::intensity::{solve_w, IntensityModel, PopulationModel};
use ultracomb::mutation::{
    clonal_interval_exponent, clonal_laplace_exponent, clonal_set, scatter_mutations, MutationMeasure,
};
use ultracomb::samplers::{
    padic_cell_midpoint, padic_comb, reduce_population_tree, replicate, rescale_comb, sample_cpp,
    sample_splitting_tree, KingmanSampler, RandomSource,
};
use ultracomb::special::exp_integral_e1;
use ultracomb::spectrum::{
    esf_normalization_defect, esf_probability, gem_ranked, integer_partitions, normalized_spectrum,
    KingmanSample, SpectrumQuery, TailModel, EXACT_SPECTRUM_MAX_N,
};
use ultracomb::stats::{ks_two_sample, mean_var, total_variation, Estimate};
use ultracomb::ultrametric::distance_matrix;
use ultracomb::{comb_distance, comb_from_ultrametric, BoundaryPoint, Comb, Tooth};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_comb(rng: &mut RandomSource, max_teeth: usize) -> Comb {
    let n = rng.random_range(1..=max_teeth);
    let mut pos: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();
    let teeth = pos.into_iter().map(|x| Tooth::new(x, rng.random_range(0.01..1.0))).collect();
    Comb::new(1.0, 1.0, teeth).unwrap()
}

fn random_point(rng: &mut RandomSource, c: &Comb) -> BoundaryPoint {
    // Half of the points sit exactly on a tooth, on a random face.
    if c.n_teeth() > 0 && rng.random::<bool>() {
        let x = c.teeth()[rng.random_range(0..c.n_teeth())].pos;
        if rng.random::<bool>() {
            BoundaryPoint::left(x).unwrap()
        } else {
            BoundaryPoint::right(x).unwrap()
        }
    } else {
        BoundaryPoint::at(rng.random::<f64>())
    }
}

fn ac1() -> Outcome {
    let violations: usize = replicate(101, 1000, |rng| {
        let c = random_comb(rng, 30);
        let pts: Vec<BoundaryPoint> = (0..10).map(|_| random_point(rng, &c)).collect();
        let d = |i: usize, j: usize| comb_distance(&c, pts[i], pts[j]).unwrap();
        let mut bad = 0;
        for x in 0..10 {
            for y in 0..10 {
                for z in 0..10 {
                    if d(x, z) > d(x, y).max(d(y, z)) {
                        bad += 1;
                    }
                }
            }
        }
        bad
    })
    .into_iter()
    .sum();
    check(violations == 0, format!("{violations} violations over 10^3 combs x 10^3 triples"))
}

fn ac2() -> Outcome {
    let failures: usize = replicate(102, 1000, |rng| {
        let c = random_comb(rng, 20);
        let mids = c.leaf_midpoints();
        let d = distance_matrix(&c, &mids).unwrap();
        let emb = comb_from_ultrametric(&d, Some(&c.leaf_measures()), None).unwrap();
        let back: Vec<f64> = (0..mids.len()).map(|i| emb.midpoint(i)).collect();
        let d2 = distance_matrix(&emb.comb, &back).unwrap();
        usize::from(d != d2)
    })
    .into_iter()
    .sum();
    check(failures == 0, format!("{failures} of 10^3 combs not reproduced exactly"))
}

fn ac3() -> Outcome {
    let c = padic_comb(3, 6).unwrap();
    let white = padic_cell_midpoint(3, &[1, 2, 0, 1, 0, 0]);
    let black = padic_cell_midpoint(3, &[2, 0, 2, 0, 0, 0]);
    let grey = padic_cell_midpoint(3, &[2, 0, 2, 1, 0, 0]);
    let half = |s: f64, t: f64| comb_distance(&c, BoundaryPoint::at(s), BoundaryPoint::at(t)).unwrap() / 2.0;
    let d = padic_comb(2, 4).unwrap();
    let faces = comb_distance(&d, BoundaryPoint::left(0.625).unwrap(), BoundaryPoint::right(0.625).unwrap())
        .unwrap()
        / 2.0;
    let got = [half(white, black), half(white, grey), half(black, grey), faces];
    let want = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 81.0, 0.125];
    check(got == want, format!("half-distances {got:?}, expected {want:?}"))
}

fn ac4() -> Outcome {
    let yule = solve_w(&PopulationModel::yule(1.0), 1.0, 10_000).unwrap();
    let ey = (yule.eval(1.0) - std::f64::consts::E).abs() / std::f64::consts::E;
    let bd = solve_w(&PopulationModel::birth_death(1.0, 1.0), 5.0, 10_000).unwrap();
    let ebd = [1.0, 2.5, 5.0].iter().map(|&t| (bd.eval(t) - (1.0 + t)).abs() / (1.0 + t)).fold(0.0, f64::max);
    let err = |n| (solve_w(&PopulationModel::birth_death(1.0, 1.0), 5.0, n).unwrap().eval(5.0) - 6.0).abs();
    let order = (err(100) / err(200)).log2();
    let pass = ey < 1e-6 && ebd < 1e-6 && order >= 1.0;
    check(pass, format!("Yule rel err {ey:.2e}, critical BD rel err {ebd:.2e}, observed order {order:.2}"))
}

fn ac5() -> Outcome {
    const TARGET: usize = 10_000;
    let model = PopulationModel::yule(1.0);
    let nu = IntensityModel::FromW(solve_w(&model, 1.0, 10_000).unwrap());
    let collect = |seed: u64, f: &(dyn Fn(&mut RandomSource) -> Vec<f64> + Sync)| {
        let mut out = Vec::new();
        let mut round = 0u64;
        while out.len() < TARGET {
            for hs in replicate(seed + round, 4000, f) {
                out.extend(hs);
            }
            round += 1000;
        }
        out.truncate(TARGET);
        out
    };
    let tree = collect(105, &|rng| {
        let st = sample_splitting_tree(&model, 1.0, 100, rng).unwrap();
        reduce_population_tree(&st).unwrap().heights().collect()
    });
    let cpp = collect(205, &|rng| sample_cpp(&nu, 1.0, 0.0, rng).unwrap().comb.heights().collect());
    let ks = ks_two_sample(&tree, &cpp);
    check(ks.p_value > 0.01, format!("KS D = {:.4}, p = {:.3} on 10^4 heights each", ks.statistic, ks.p_value))
}

fn ac6() -> Outcome {
    let sampler = KingmanSampler::new(50).unwrap();
    let runs = replicate(106, 100_000, |rng| {
        let c = sampler.sample(rng);
        let mut h: Vec<f64> = c.heights().collect();
        h.sort_by(|a, b| b.total_cmp(a));
        let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
        let d = comb_distance(&c, BoundaryPoint::at(x), BoundaryPoint::at(y)).unwrap();
        (h[..8].to_vec(), d)
    });
    let mut worst: f64 = 0.0;
    for j in 0..8 {
        let m = runs.iter().map(|r| r.0[j]).sum::<f64>() / runs.len() as f64;
        let target = 2.0 / (j + 1) as f64;
        worst = worst.max((m - target).abs() / target);
    }
    let dm = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    let ed = (dm - 2.0).abs() / 2.0;
    check(worst < 0.02 && ed < 0.02, format!("max rel err E[tau_j] {worst:.4}, pairwise mean {dm:.4}"))
}

fn ac7() -> Outcome {
    let n = 5;
    let parts = integer_partitions(n);
    let exact: Vec<f64> = parts.iter().map(|a| esf_probability(1.0, n, a).unwrap()).collect();
    let ks = KingmanSample::new(n, 1.0).unwrap();
    let mut hits = vec![0usize; parts.len()];
    let mut constraint_ok = true;
    for s in replicate(107, 100_000, |rng| ks.spectrum(rng)) {
        constraint_ok &= s.total() == n as f64;
        let a: Vec<usize> = (1..=n).map(|k| s.count(k)).collect();
        hits[parts.iter().position(|p| *p == a).unwrap()] += 1;
    }
    let emp: Vec<f64> = hits.iter().map(|&h| h as f64 / 100_000.0).collect();
    let tv = total_variation(&emp, &exact);
    let defect = [0.5, 1.0, 2.0]
        .iter()
        .flat_map(|&th| (1..=EXACT_SPECTRUM_MAX_N).map(move |m| esf_normalization_defect(th, m).unwrap()))
        .fold(0.0, f64::max);
    check(
        tv < 0.01 && defect < 1e-12 && constraint_ok,
        format!("TV = {tv:.4}, max normalization defect {defect:.1e}, sum k A(k) = n: {constraint_ok}"),
    )
}

fn ac8() -> Outcome {
    let ks = KingmanSample::new(1000, 1.0).unwrap();
    let a1: Vec<f64> = replicate(108, 4000, |rng| ks.spectrum(rng).count(1) as f64);
    let (m, v) = mean_var(&a1);
    check((m - 1.0).abs() < 0.1 && (v - 1.0).abs() < 0.1, format!("mean {m:.4}, variance {v:.4} (4000 reps)"))
}

fn ac9() -> Outcome {
    let n = 2000;
    let ks = KingmanSample::new(n, 1.0).unwrap();
    let x1: Vec<f64> =
        replicate(109, 2000, |rng| ks.partition(rng).block_sizes().max().unwrap() as f64 / n as f64);
    let gem: Vec<f64> = replicate(209, 2000, |rng| gem_ranked(1.0, 60, rng)[0]);
    let r = ks_two_sample(&x1, &gem);
    check(r.p_value > 0.01, format!("KS D = {:.4}, p = {:.3} (2000 vs 2000)", r.statistic, r.p_value))
}

fn ac10() -> Outcome {
    let bd = normalized_spectrum(TailModel::CriticalBirthDeath, 1.0, 50.0, &[SpectrumQuery::Exactly(1)], 1000, 110)
        .unwrap()[0];
    let br = normalized_spectrum(TailModel::Brownian { eps: 1e-3 }, 1.0, 50.0, &[SpectrumQuery::Tail(1.0)], 1000, 210)
        .unwrap()[0];
    let e1 = exp_integral_e1(1.0);
    let ok_bd = (bd.estimate - 0.5).abs() < 0.05;
    let ok_br = (br.estimate - e1).abs() < 0.1 * e1;
    check(
        ok_bd && ok_br,
        format!(
            "critical BD {:.4} +- {:.4} (target 0.5); Brownian {:.4} +- {:.4} (target {:.5})",
            bd.estimate, bd.stderr, br.estimate, br.stderr, e1
        ),
    )
}

fn ac11() -> Outcome {
    let nu = IntensityModel::critical_birth_death(1.0).unwrap();
    let mu = MutationMeasure::uniform(1.0);
    let (t_max, t) = (10.0, 1.0);
    let hits: Vec<f64> = replicate(111, 200_000, |rng| {
        let cpp = sample_cpp(&nu, t_max, 0.0, rng).unwrap();
        if cpp.width <= t {
            return f64::NAN;
        }
        let ms = scatter_mutations(&cpp.comb, &mu, false, rng).unwrap();
        f64::from(u8::from(clonal_set(&cpp.comb, &ms).covers_prefix(t)))
    })
    .into_iter()
    .filter(|x| !x.is_nan())
    .collect();
    let p = Estimate::from_samples(&hits);
    let target = (-t * clonal_interval_exponent(&nu, &mu, 0.0, t_max).unwrap()).exp();
    let phi1 = clonal_laplace_exponent(&nu, &mu, 1.0).unwrap();
    let oracle = 1.0 / (1.0 - 2f64.exp() * exp_integral_e1(2.0));
    let lam = 1e6;
    let ratio = lam / clonal_laplace_exponent(&nu, &mu, lam).unwrap();
    let pass = (p.mean - target).abs() < 0.05 * target && (phi1 - oracle).abs() < 1e-4 && (ratio - 1.0).abs() < 1e-3;
    check(
        pass,
        format!(
            "P(clonal prefix) {:.4} +- {:.4} vs {:.4}; phi(1) {phi1:.6} vs {oracle:.6}; lambda/phi at 1e6 {ratio:.6}",
            p.mean, p.stderr, target
        ),
    )
}

fn ac12() -> Outcome {
    let sampler = KingmanSampler::new(10_000).unwrap();
    let eps = 1e-3;
    let counts = replicate(112, 10_000, |rng| {
        let c = rescale_comb(&sampler.sample(rng), eps).unwrap();
        let above = |h: f64| c.heights().filter(|&x| x > h).count() as f64;
        (above(0.5), above(1.0))
    });
    let m05 = counts.iter().map(|c| c.0).sum::<f64>() / counts.len() as f64;
    let m1 = counts.iter().map(|c| c.1).sum::<f64>() / counts.len() as f64;
    let pass = (m05 - 4.0).abs() < 0.4 && (m1 - 2.0).abs() < 0.2;
    check(pass, format!("mean counts above 0.5: {m05:.3} (4), above 1: {m1:.3} (2)"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("ultrametric inequality", ac1),
        ("ultrametric round-trip", ac2),
        ("p-adic figure distances", ac3),
        ("W solver accuracy", ac4),
        ("splitting tree vs CPP", ac5),
        ("Kingman comb moments", ac6),
        ("Ewens sampling formula", ac7),
        ("harmonic singleton count", ac8),
        ("GEM largest block", ac9),
        ("normalized spectrum limits", ac10),
        ("clonal set", ac11),
        ("rescaled Kingman teeth", ac12),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let tag = format!("AC{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|x| x == &tag) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag:>4} {status} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
