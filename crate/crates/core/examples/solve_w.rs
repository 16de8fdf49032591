//! W(t) for a few population models; 1/W is the CPP intensity tail.

use ultracomb::intensity::{solve_w, BirthRate, Lifetime, PopulationModel};

fn main() -> ultracomb::Result<()> {
    let models = [
        ("yule b=1", PopulationModel::yule(1.0)),
        ("birth-death 1/1", PopulationModel::birth_death(1.0, 1.0)),
        ("fixed lifetime 1", PopulationModel { birth_rate: BirthRate::Constant(1.5), lifetime: Lifetime::Fixed(1.0) }),
    ];
    for (name, m) in models {
        let w = solve_w(&m, 3.0, 6000)?;
        println!("{name:<18} W(1) = {:.6}  W(3) = {:.6}", w.eval(1.0), w.eval(3.0));
    }
    println!("closed forms: e = {:.6}, 1 + t = 2 and 4", std::f64::consts::E);
    Ok(())
}
