//! Kingman genealogy + neutral mutations vs the Ewens sampling formula.

use ultracomb::samplers::replicate;
use ultracomb::spectrum::{esf_probability, integer_partitions, KingmanSample};
use ultracomb::stats::total_variation;

fn main() -> ultracomb::Result<()> {
    let (n, theta, reps) = (4, 1.5, 50_000);
    let parts = integer_partitions(n);
    let ks = KingmanSample::new(n, theta)?;
    let mut hits = vec![0usize; parts.len()];
    for s in replicate(3, reps, |rng| ks.spectrum(rng)) {
        let a: Vec<usize> = (1..=n).map(|k| s.count(k)).collect();
        hits[parts.iter().position(|p| *p == a).expect("a partition of n")] += 1;
    }
    let mut emp = Vec::new();
    let mut exact = Vec::new();
    for (a, h) in parts.iter().zip(&hits) {
        let p = esf_probability(theta, n, a)?;
        emp.push(*h as f64 / reps as f64);
        exact.push(p);
        println!("{a:?}  simulated {:.4}  exact {p:.4}", emp.last().unwrap());
    }
    println!("total variation {:.4}", total_variation(&emp, &exact));
    Ok(())
}
