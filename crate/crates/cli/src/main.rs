use std::process::ExitCode;

use clap::Parser;

use ierank_cli::commands;
use ierank_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = cli.settings().and_then(|settings| commands::run(&settings));
    match result {
        Ok((report, written)) => {
            print!("{}", report.summary);
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
