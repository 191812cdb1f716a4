use clap::Parser;

use seqlab_server::cli::{run, Cli};

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("seqlab: {e}");
        std::process::exit(1);
    }
}
