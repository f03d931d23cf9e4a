//! Fits nested Legendre trend spaces and reports the cost curve.
//!
//! cargo run --release --example select_trend_dimension -- [seed]

use trendwarp::basis::{BasisFamily, BasisSpec};
use trendwarp::estimator::{select_subspace, EstimatorConfig};
use trendwarp::synthgen::{generate, Scenario, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let panel = generate(&ScenarioSpec::new(Scenario::SubspaceSelection).with_seed(seed))?;
    let family = BasisFamily::ShiftedLegendre;
    let cfg = EstimatorConfig::new(BasisSpec::new(family, 1)?);
    let sel = select_subspace(&panel.observations, family, 1..=10, &cfg)?;
    for row in sel.table() {
        let mark = if row.l == sel.selected { " <-" } else { "" };
        println!("l = {:2}  cost {:.6e}{mark}", row.l, row.neg_log_likelihood);
    }
    Ok(())
}
