use clap::Parser;
use everett_cli::cli::{main_with, Cli};

fn main() {
    let cli = Cli::parse();
    let code = main_with(cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
