//! Group operations on warpings and the Karcher-mean centering step.
//!
//! cargo run --release --example karcher_centering

use trendwarp::gridfn::{Grid, GridFunction};
use trendwarp::warping::{action, center_warpings, compose, inverse, karcher_mean, Warping, KARCHER_MAX_ITER, KARCHER_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid::uniform(201)?;
    let gammas: Vec<Warping> = (1..=8)
        .map(|i| {
            let c = -0.9 + 0.2 * i as f64;
            Warping::from_fn(&grid, move |t| t + c * t * (1.0 - t))
        })
        .collect::<Result<_, _>>()?;

    let f = GridFunction::from_fn(&grid, |t| (6.0 * t).sin());
    let warped = action(&f, &gammas[0])?;
    println!("norm before {:.6}, after {:.6}", f.norm(), warped.norm());

    let round = compose(&gammas[0], &inverse(&gammas[0]))?;
    println!("sup |gamma o gamma^-1 - id| = {:.2e}", round.sup_distance(&Warping::identity(&grid)));

    let centered = center_warpings(&gammas)?;
    let inverses: Vec<Warping> = centered.warpings.iter().map(inverse).collect();
    let km = karcher_mean(&inverses, KARCHER_TOL, KARCHER_MAX_ITER)?;
    println!(
        "Karcher mean of centered inverses: sup distance to identity {:.2e} ({} iterations)",
        km.mean.sup_distance(&Warping::identity(&grid)),
        km.iterations
    );
    Ok(())
}
