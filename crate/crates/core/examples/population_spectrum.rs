//! Whole-population allele spectra normalized by the CPP width.

use ultracomb::spectrum::{normalized_spectrum, SpectrumQuery, TailModel};

fn main() -> ultracomb::Result<()> {
    let theta = 1.0;
    let bd = normalized_spectrum(
        TailModel::CriticalBirthDeath,
        theta,
        30.0,
        &[SpectrumQuery::Exactly(1), SpectrumQuery::Exactly(2), SpectrumQuery::Tail(3.0)],
        500,
        1,
    )?;
    println!("critical birth-death, alleles counted in individuals");
    for e in bd {
        println!("  q = {}: {:.4} +- {:.4} (limit {:.4})", e.q, e.estimate, e.stderr, e.target);
    }
    let br = normalized_spectrum(
        TailModel::Brownian { eps: 1e-3 },
        theta,
        30.0,
        &[SpectrumQuery::Tail(0.5), SpectrumQuery::Tail(1.0), SpectrumQuery::Tail(2.0)],
        500,
        2,
    )?;
    println!("Brownian, alleles measured by carrier length");
    for e in br {
        println!("  q = {}: {:.4} +- {:.4} (limit {:.4})", e.q, e.estimate, e.stderr, e.target);
    }
    Ok(())
}
