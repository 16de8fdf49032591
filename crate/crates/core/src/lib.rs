mod error;

pub mod coders;
pub mod experiment;
pub mod comb;
pub mod intensity;
pub mod mutation;
pub mod quad;
pub mod samplers;
pub mod special;
pub mod spectrum;
pub mod stats;
pub mod tree;
pub mod ultrametric;

pub use comb::{ball_partition, comb_distance, BoundaryPoint, Comb, CombIndex, Face, Partition, Tooth};
pub use error::{Error, Result};
pub use tree::Tree;
pub use ultrametric::{comb_from_ultrametric, comb_to_tree};
