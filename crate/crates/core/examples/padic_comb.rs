use ultracomb::samplers::{padic_cell_midpoint, padic_comb};
use ultracomb::comb::position_distance;

fn main() -> ultracomb::Result<()> {
    let c = padic_comb(3, 6)?;
    println!("triadic comb of depth 6: {} teeth", c.n_teeth());
    let a = padic_cell_midpoint(3, &[1, 2, 0, 1, 0, 0]);
    let b = padic_cell_midpoint(3, &[2, 0, 2, 0, 0, 0]);
    let g = padic_cell_midpoint(3, &[2, 0, 2, 1, 0, 0]);
    // Comb distances are twice the p-adic distance 3^{-k}.
    println!("d(a, b) / 2 = {}", position_distance(&c, a, b)? / 2.0);
    println!("d(b, g) / 2 = {}", position_distance(&c, b, g)? / 2.0);
    Ok(())
}
