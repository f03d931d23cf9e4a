//! Drives the command-line front end in-process: simulate, then decompose.
//!
//! cargo run --release --example cli_pipeline -- [output-dir]

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "trendwarp-demo".into());
    let sim = format!("{dir}/sim");
    let fit = format!("{dir}/fit");
    let code = trendwarp::cli::run(["trendwarp", "simulate", "--scenario", "fig1", "--out", &sim]);
    if code != 0 {
        std::process::exit(code);
    }
    let panel = format!("{sim}/panel.csv");
    let code = trendwarp::cli::run(["trendwarp", "decompose", &panel, "--l", "4", "--plots", "--out", &fit]);
    std::process::exit(code);
}
