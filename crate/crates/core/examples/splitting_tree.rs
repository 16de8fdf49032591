//! A birth-death splitting tree, its reduced tree at T as a comb, and the
//! comparison with a CPP sampled from 1/W.

use ultracomb::intensity::{solve_w, IntensityModel, PopulationModel};
use ultracomb::samplers::{reduce_population_tree, replicate, sample_cpp, sample_splitting_tree, RandomSource};
use ultracomb::stats::ks_two_sample;

fn main() -> ultracomb::Result<()> {
    let (m, t) = (PopulationModel::birth_death(2.0, 1.0), 2.0);
    let st = sample_splitting_tree(&m, t, 1000, &mut RandomSource::new(5))?;
    let c = reduce_population_tree(&st)?;
    println!("{} individuals, {} alive at T, comb with {} teeth", st.individuals.len(), st.survivors().len(), c.n_teeth());

    let nu = IntensityModel::FromW(solve_w(&m, t, 4000)?);
    let a: Vec<f64> = replicate(6, 3000, |rng| {
        let st = sample_splitting_tree(&m, t, 1000, rng).expect("survives");
        reduce_population_tree(&st).expect("valid").heights().collect::<Vec<_>>()
    })
    .concat();
    let b: Vec<f64> = replicate(7, 3000, |rng| sample_cpp(&nu, t, 0.0, rng).expect("valid").comb.heights().collect::<Vec<_>>())
        .concat();
    let ks = ks_two_sample(&a, &b);
    println!("tooth heights: {} vs {} samples, KS p = {:.3}", a.len(), b.len(), ks.p_value);
    Ok(())
}
