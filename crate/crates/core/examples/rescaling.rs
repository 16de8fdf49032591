//! Zooming into the left end of a Kingman comb: after rescaling by ε the
//! teeth above h average 2/h.

use ultracomb::samplers::{replicate, rescale_comb, KingmanSampler};

fn main() -> ultracomb::Result<()> {
    let sampler = KingmanSampler::new(10_000)?;
    let eps = 1e-3;
    let reps = 5_000;
    let combs = replicate(4, reps, |rng| rescale_comb(&sampler.sample(rng), eps).expect("valid"));
    for h in [0.25, 0.5, 1.0, 2.0] {
        let m = combs.iter().map(|c| c.heights().filter(|&x| x > h).count()).sum::<usize>() as f64 / reps as f64;
        println!("h = {h:<4}  mean teeth above h {m:.3}  2/h = {:.3}", 2.0 / h);
    }
    Ok(())
}
