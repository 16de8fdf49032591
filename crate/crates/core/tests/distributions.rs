//! Distributional checks of the samplers against closed forms.

use rand::Rng;
use ultracomb::intensity::{solve_w, IntensityModel, PopulationModel};
use ultracomb::samplers::{replicate, rescale_comb, sample_cpp, sample_splitting_tree, KingmanSampler};
use ultracomb::stats::ks_one_sample;
use ultracomb::{comb_distance, BoundaryPoint};

fn cpp_heights(nu: &IntensityModel, t: f64, eps: f64, seed: u64, want: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut batch = 0;
    while out.len() < want {
        for hs in replicate(seed + batch, 2000, |rng| sample_cpp(nu, t, eps, rng).unwrap().comb.heights().collect::<Vec<_>>()) {
            out.extend(hs);
        }
        batch += 1_000_000;
    }
    out.truncate(want);
    out
}

#[test]
fn cpp_height_tail_matches_intensity() {
    for (nu, t, eps) in [
        (IntensityModel::critical_birth_death(1.0).unwrap(), 5.0, 0.0),
        (IntensityModel::brownian(1.0).unwrap(), 2.0, 0.01),
        (IntensityModel::critical_birth_death(3.0).unwrap(), 1.0, 0.1),
    ] {
        let hs = cpp_heights(&nu, t, eps, 31, 10_000);
        assert!(hs.iter().all(|&h| h < t && h >= eps));
        let (top, bottom) = (nu.tail(eps), nu.tail(t));
        let r = ks_one_sample(&hs, |x| 1.0 - (nu.tail(x) - bottom) / (top - bottom));
        assert!(r.p_value > 0.01, "{} model: {r:?}", nu.name());
    }
}

#[test]
fn cpp_width_is_exponential_with_rate_one_over_w() {
    let w = solve_w(&PopulationModel::birth_death(2.0, 1.0), 3.0, 4000).unwrap();
    let rate = 1.0 / w.eval(3.0);
    let nu = IntensityModel::FromW(w);
    let widths = replicate(32, 10_000, |rng| sample_cpp(&nu, 3.0, 0.0, rng).unwrap().width);
    let r = ks_one_sample(&widths, |x| 1.0 - (-rate * x).exp());
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn kingman_pair_distance_is_twice_exponential() {
    let s = KingmanSampler::new(200).unwrap();
    let d = replicate(33, 10_000, |rng| {
        let c = s.sample(rng);
        let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
        comb_distance(&c, BoundaryPoint::at(x), BoundaryPoint::at(y)).unwrap()
    });
    let r = ks_one_sample(&d, |x| 1.0 - (-x / 2.0).exp());
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn three_sample_topologies_are_uniform() {
    let s = KingmanSampler::new(200).unwrap();
    let reps = 100_000;
    let cherries = replicate(34, reps, |rng| {
        let c = s.sample(rng);
        let x: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let d = |i: usize, j: usize| comb_distance(&c, BoundaryPoint::at(x[i]), BoundaryPoint::at(x[j])).unwrap();
        let pairs = [d(0, 1), d(0, 2), d(1, 2)];
        (0..3).min_by(|&a, &b| pairs[a].total_cmp(&pairs[b])).unwrap()
    });
    for k in 0..3 {
        let p = cherries.iter().filter(|&&c| c == k).count() as f64 / reps as f64;
        assert!((p - 1.0 / 3.0).abs() < 0.02 / 3.0, "topology {k}: {p}");
    }
}

#[test]
fn brownian_width_mean_is_two_t() {
    let nu = IntensityModel::brownian(0.5).unwrap();
    let w = replicate(35, 100_000, |rng| sample_cpp(&nu, 1.0, 0.1, rng).unwrap().width);
    let m = w.iter().sum::<f64>() / w.len() as f64;
    assert!((m - 2.0).abs() < 0.04, "{m}");
    let r = ks_one_sample(&w[..10_000], |x| 1.0 - (-x / 2.0).exp());
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn critical_bd_teeth_per_unit_width() {
    let t = 3.0;
    let nu = IntensityModel::critical_birth_death(1.0).unwrap();
    let runs = replicate(36, 50_000, |rng| {
        let s = sample_cpp(&nu, t, 0.0, rng).unwrap();
        (s.comb.n_teeth() as f64, s.width)
    });
    let teeth: f64 = runs.iter().map(|r| r.0).sum();
    let width: f64 = runs.iter().map(|r| r.1).sum();
    let want = 1.0 - 1.0 / (1.0 + t);
    assert!((teeth / width - want).abs() < 0.02 * want, "{}", teeth / width);
}

#[test]
fn yule_survivors_are_geometric() {
    let m = PopulationModel::yule(1.0);
    let counts = replicate(37, 40_000, |rng| sample_splitting_tree(&m, 1.0, 10, rng).unwrap().survivors().len());
    let p = (-1.0f64).exp();
    for k in 1..=4 {
        let emp = counts.iter().filter(|&&c| c == k).count() as f64 / counts.len() as f64;
        let want = p * (1.0 - p).powi(k as i32 - 1);
        assert!((emp - want).abs() < 0.01, "k = {k}: {emp} vs {want}");
    }
}

#[test]
fn rescaling_by_one_is_the_identity() {
    let c = KingmanSampler::new(50).unwrap().sample(&mut ultracomb::samplers::RandomSource::new(38));
    assert_eq!(rescale_comb(&c, 1.0).unwrap(), c);
}
