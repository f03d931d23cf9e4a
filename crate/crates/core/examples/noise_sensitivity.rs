//! Estimation error of the noise scenario as the noise level grows.
//!
//! cargo run --release --example noise_sensitivity

use trendwarp::estimator::{decompose, EstimatorConfig};
use trendwarp::gridfn::GridFunction;
use trendwarp::synthgen::{generate, Scenario, ScenarioSpec};

fn rel(est: &GridFunction, truth: &GridFunction) -> f64 {
    (est - truth).norm() / truth.norm()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::NoisePerturbation;
    let cfg = EstimatorConfig::new(scenario.trend_basis());
    println!("sigma   trend   season  warping");
    for sigma in [0.0, 0.2, 0.4, 0.8, 1.6] {
        let panel = generate(&ScenarioSpec::new(scenario).with_sigma(sigma))?;
        let res = decompose(&panel.observations, &cfg)?;
        let warp = res
            .warpings
            .iter()
            .zip(&panel.truth.warpings)
            .map(|(a, b)| a.sup_distance(b))
            .sum::<f64>()
            / res.warpings.len() as f64;
        println!(
            "{sigma:5.1}  {:.4}  {:.4}  {:.4}",
            rel(&res.h_hat, &panel.truth.h),
            rel(&res.g_hat, &panel.truth.g),
            warp
        );
    }
    Ok(())
}
