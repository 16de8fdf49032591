//! A jumping contour, the tree it codes and the comb of its sphere at a level.

use ultracomb::coders::{level_visit_times, sphere_comb_from_contour, tree_from_contour, ContourFunction};

fn main() -> ultracomb::Result<()> {
    let h = ContourFunction::from_jumps(&[(0.0, 12.0), (4.0, 3.0), (9.0, 6.0)])?;
    let tree = tree_from_contour(&h);
    println!("{}", tree.tree().to_newick());
    let level = 10.0;
    let visits = level_visit_times(&h, level);
    println!("visits of level {level}: {visits:?}");
    let c = sphere_comb_from_contour(&h, level)?;
    println!("sphere comb heights: {:?}", c.heights().collect::<Vec<_>>());
    println!("d_h between first and last visit: {}", tree.distance(visits[0], visits[visits.len() - 1]));
    Ok(())
}
