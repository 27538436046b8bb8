use clap::Parser;

use stcomplete::cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error[{}]: {e}", e.class());
        std::process::exit(exit_code(&e));
    }
}
