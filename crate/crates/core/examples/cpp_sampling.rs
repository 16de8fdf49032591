//! Coalescent point processes for the Brownian and critical birth-death
//! intensities, with the mean width 1/ν̄(T).

use ultracomb::intensity::IntensityModel;
use ultracomb::samplers::{replicate, sample_cpp};

fn main() -> ultracomb::Result<()> {
    let t = 4.0;
    for (nu, eps) in [(IntensityModel::brownian(1.0)?, 0.01), (IntensityModel::critical_birth_death(1.0)?, 0.0)] {
        let runs = replicate(11, 10_000, |rng| sample_cpp(&nu, t, eps, rng).expect("valid parameters"));
        let width = runs.iter().map(|r| r.width).sum::<f64>() / runs.len() as f64;
        let teeth = runs.iter().map(|r| r.comb.n_teeth()).sum::<usize>() as f64 / runs.len() as f64;
        println!(
            "{:<12} mean width {width:.3} (1/nu_tail(T) = {:.3}), mean teeth {teeth:.1}",
            nu.name(),
            1.0 / nu.tail(t)
        );
    }
    Ok(())
}
