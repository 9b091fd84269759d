use clap::Parser;
use sparsedisc_cli::config::{Cli, RunConfig};

fn main() {
    let cli = Cli::parse();
    let code = match RunConfig::resolve(&cli).and_then(|cfg| sparsedisc_cli::run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sparsedisc: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
