use clap::Parser;
use dazzle_cli::{error_line, exit_code, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DAZZLE_LOG", "info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(&cli, std::env::vars()) {
        Ok(Some(summary)) => println!("{summary}"),
        Ok(None) => {}
        Err(e) => {
            eprintln!("{}", error_line(&e));
            std::process::exit(exit_code(e.kind()));
        }
    }
}
