use clap::Parser;
use gdr_ae_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    if let Err(e) = run(cli.command, &mut stdout.lock()) {
        eprintln!("gdr-ae: {e}");
        std::process::exit(e.exit_code());
    }
}
