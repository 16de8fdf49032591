//! Comb -> distance matrix -> comb, then the tree of the comb as Newick.

use ultracomb::ultrametric::distance_matrix;
use ultracomb::{comb_from_ultrametric, comb_to_tree, Comb, Tooth};

fn main() -> ultracomb::Result<()> {
    let c = Comb::new(1.0, 3.0, vec![Tooth::new(0.2, 1.0), Tooth::new(0.5, 2.0), Tooth::new(0.7, 0.5)])?;
    let d = distance_matrix(&c, &c.leaf_midpoints())?;
    for row in &d {
        println!("{row:?}");
    }
    let emb = comb_from_ultrametric(&d, None, None)?;
    println!("rebuilt teeth: {:?}", emb.comb.teeth());
    println!("{}", comb_to_tree(&c).to_newick());
    Ok(())
}
