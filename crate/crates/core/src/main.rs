fn main() {
    std::process::exit(enrich_ci::cli::run());
}
