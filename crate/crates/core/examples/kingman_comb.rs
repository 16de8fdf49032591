//! Sample a Kingman comb and compare its sorted tooth heights with E[τ_j] = 2/j.

use ultracomb::samplers::{replicate, KingmanSampler, RandomSource};

fn main() -> ultracomb::Result<()> {
    let sampler = KingmanSampler::new(100)?;
    let comb = sampler.sample(&mut RandomSource::new(1));
    println!("one comb: {} teeth, origin height {:.3}", comb.n_teeth(), comb.origin_height());

    let reps = 20_000;
    let sorted = replicate(2, reps, |rng| {
        let mut h: Vec<f64> = sampler.sample(rng).heights().collect();
        h.sort_by(|a, b| b.total_cmp(a));
        h
    });
    println!(" j   mean tau_j   2/j");
    for j in 1..=6 {
        let m = sorted.iter().map(|h| h[j - 1]).sum::<f64>() / reps as f64;
        println!("{j:>2}   {m:>9.4}   {:.4}", 2.0 / j as f64);
    }
    Ok(())
}
