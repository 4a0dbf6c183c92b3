//! Synthetic scenario generation and the scenario file format.

mod file;
mod generate;

pub use file::{load_scenario, save_scenario, scenario_from_str, scenario_to_string};
pub use generate::{
    generate_scenario, grid_edges, shortest_path, zipf_weights, GenConfig, Topology,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::Scenario;
use crate::scalar::Scalar;

/// Generates a scenario from `g.seed`.
pub fn generate_seeded<T: Scalar>(g: &GenConfig) -> Result<Scenario<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    generate_scenario(g, &mut rng)
}
