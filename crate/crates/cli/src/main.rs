use clap::Parser;
use sphp_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("sphp: {e}");
        std::process::exit(e.exit_code());
    }
}
