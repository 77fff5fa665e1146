fn main() {
    let seed = std::env::var(qrecover_cli::config::SEED_ENV).ok();
    std::process::exit(qrecover_cli::run_with_env(std::env::args_os(), seed));
}
