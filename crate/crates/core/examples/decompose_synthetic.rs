//! Recovers trend, seasonality and warpings from the noiseless `fig1` panel.
//!
//! cargo run --release --example decompose_synthetic

use trendwarp::estimator::{decompose, EstimatorConfig};
use trendwarp::gridfn::GridFunction;
use trendwarp::synthgen::{generate, Scenario, ScenarioSpec};

fn rel(est: &GridFunction, truth: &GridFunction) -> f64 {
    (est - truth).norm() / truth.norm()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::Fig1;
    let panel = generate(&ScenarioSpec::new(scenario))?;
    let cfg = EstimatorConfig::new(scenario.trend_basis());
    let res = decompose(&panel.observations, &cfg)?;

    println!("iterations   {}", res.iterations());
    println!("initial cost {:.4e}", res.initial_cost);
    println!("final cost   {:.4e}", res.neg_log_likelihood);
    println!("trend error  {:.4}", rel(&res.h_hat, &panel.truth.h));
    println!("season error {:.4}", rel(&res.g_hat, &panel.truth.g));
    let worst = res
        .warpings
        .iter()
        .zip(&panel.truth.warpings)
        .map(|(a, b)| a.sup_distance(b))
        .fold(0.0, f64::max);
    println!("worst warping sup-distance {worst:.4}");
    Ok(())
}
