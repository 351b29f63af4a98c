use clap::Parser;

fn main() {
    std::process::exit(lrop::cli::execute(lrop::cli::Cli::parse()));
}
