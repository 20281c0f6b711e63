use clap::Parser;

use clustering::cli::{main_with, Args};

fn main() {
    std::process::exit(main_with(&Args::parse()));
}
