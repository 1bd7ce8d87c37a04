use clap::Parser;
use roadwatch::cli::{execute, init_logging, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            std::process::exit(4);
        }
    };
    init_logging();
    if let Err(e) = execute(&cli, &mut std::io::stdout().lock()) {
        log::error!("{e}");
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
