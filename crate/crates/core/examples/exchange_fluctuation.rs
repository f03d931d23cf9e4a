//! Converts a daily rate series to percent fluctuations.
//!
//! cargo run --example exchange_fluctuation

use trendwarp::synthgen::fluctuation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rates = [6.83, 6.84, 6.81, 6.81, 6.86, 6.90, 6.88];
    for (k, tau) in fluctuation(&rates)?.iter().enumerate() {
        println!("day {}: {tau:+.4}%", k + 1);
    }
    Ok(())
}
