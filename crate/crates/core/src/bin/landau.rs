use clap::Parser;
use landau_core::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(execute(&cli) as i32);
}
