fn main() {
    std::process::exit(covariance_landscape::cli::run());
}
