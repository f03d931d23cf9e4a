//! Orthonormal trend bases and the projections onto H and its complement.
//!
//! cargo run --release --example basis_projection

use trendwarp::basis::{build_orthonormal, BasisFamily, BasisSpec};
use trendwarp::gridfn::{Grid, GridFunction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid::uniform(200)?;
    let f = GridFunction::from_fn(&grid, |t| 1.5 * (-3.0 * t).exp() + (10.0 * std::f64::consts::PI * t).cos());
    for family in BasisFamily::ALL {
        for l in [2, 4, 8] {
            let basis = build_orthonormal(BasisSpec::new(family, l)?, &grid)?;
            let mut gram_err: f64 = 0.0;
            for (i, a) in basis.functions().iter().enumerate() {
                for (j, b) in basis.functions().iter().enumerate() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    gram_err = gram_err.max((a.inner_product(b)? - target).abs());
                }
            }
            let h = basis.project(&f)?;
            let rest = basis.project_complement(&f)?;
            println!(
                "{:8} l={l}  gram error {gram_err:.1e}  |Pf| {:.4}  <Pf, (I-P)f> {:.1e}",
                family.name(),
                h.norm(),
                h.inner_product(&rest)?
            );
        }
    }
    Ok(())
}
