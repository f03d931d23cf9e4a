fn main() {
    std::process::exit(trendwarp::cli::run(std::env::args_os()));
}
