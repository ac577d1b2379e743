use clap::Parser;

fn main() {
    std::process::exit(activecrf::cli::run(activecrf::cli::Cli::parse()));
}
