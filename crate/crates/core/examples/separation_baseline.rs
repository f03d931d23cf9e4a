//! The warping-free baseline: its cost does not move with the trend dimension,
//! while the warped model's does.
//!
//! cargo run --release --example separation_baseline

use trendwarp::basis::{BasisFamily, BasisSpec};
use trendwarp::estimator::{decompose, decompose_separation, EstimatorConfig};
use trendwarp::synthgen::{generate, Scenario, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let panel = generate(&ScenarioSpec::new(Scenario::SubspaceSelection))?;
    println!(" l  separation    warped");
    for l in 1..=6 {
        let spec = BasisSpec::new(BasisFamily::ShiftedLegendre, l)?;
        let sep = decompose_separation(&panel.observations, spec)?;
        let mle = decompose(&panel.observations, &EstimatorConfig::new(spec))?;
        println!("{l:2}  {:.6e}  {:.6e}", sep.neg_log_likelihood, mle.neg_log_likelihood);
    }
    Ok(())
}
