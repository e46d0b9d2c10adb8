use clap::Parser;
use fisherbound::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
