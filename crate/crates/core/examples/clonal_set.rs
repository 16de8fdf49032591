//! The clonal set of a CPP and the Laplace exponent of its subordinator.

use ultracomb::intensity::IntensityModel;
use ultracomb::mutation::{clonal_interval_exponent, clonal_laplace_exponent, clonal_set, scatter_mutations, MutationMeasure};
use ultracomb::samplers::{replicate, sample_cpp, RandomSource};

fn main() -> ultracomb::Result<()> {
    let nu = IntensityModel::critical_birth_death(1.0)?;
    let mu = MutationMeasure::uniform(1.0);
    let mut rng = RandomSource::new(8);
    let cpp = sample_cpp(&nu, 10.0, 0.0, &mut rng)?;
    let ms = scatter_mutations(&cpp.comb, &mu, false, &mut rng)?;
    let cs = clonal_set(&cpp.comb, &ms);
    println!("width {:.3}, clonal measure {:.3} in {} intervals", cpp.width, cs.measure(), cs.intervals.len());

    for lambda in [0.5, 1.0, 10.0] {
        println!("phi({lambda}) = {:.6}", clonal_laplace_exponent(&nu, &mu, lambda)?);
    }

    let t = 1.0;
    let hits: Vec<bool> = replicate(9, 50_000, |rng| {
        let cpp = sample_cpp(&nu, 10.0, 0.0, rng).expect("valid");
        (cpp.width > t).then(|| {
            let ms = scatter_mutations(&cpp.comb, &mu, false, rng).expect("finite");
            clonal_set(&cpp.comb, &ms).covers_prefix(t)
        })
    })
    .into_iter()
    .flatten()
    .collect();
    let p = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
    let target = (-t * clonal_interval_exponent(&nu, &mu, 0.0, 10.0)?).exp();
    println!("P([0, {t}] clonal) simulated {p:.4}, predicted {target:.4}");
    Ok(())
}
