use clap::Parser;
use meterbench::cli::{execute, init_logging, Cli};

fn main() {
    init_logging();
    let args: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&args);
    if let Err(e) = execute(&cli, &args) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
