//! Dynamic-programming alignment of a curve to a time-warped copy of itself.
//!
//! cargo run --release --example align_pair

use trendwarp::dpalign::{dp_align, DpConfig};
use trendwarp::gridfn::{Grid, GridFunction};
use trendwarp::warping::{action, Warping};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid::uniform(200)?;
    let g = GridFunction::from_fn(&grid, |t| (-60.0 * (t - 0.4).powi(2)).exp() - 0.5 * (-80.0 * (t - 0.75).powi(2)).exp());
    let gamma = Warping::from_fn(&grid, |t| t + 0.15 * t * (1.0 - t))?;
    let q = action(&g, &gamma)?;

    let found = dp_align(&q, &g, &DpConfig::default())?;
    let before = (&q - &g).norm().powi(2);
    println!("cost without warping {before:.4e}");
    println!("cost after alignment {:.4e}", found.cost);
    println!("sup |gamma_hat - gamma| = {:.4}", found.warping.sup_distance(&gamma));
    Ok(())
}
