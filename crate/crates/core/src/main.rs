use clap::{Parser, Subcommand};
use fullfrac::cli;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fullfrac", about = "Experiments with the fully fractional heat operator")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key by dotted path, e.g. params.s=0.25.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print the config keys and the experiment catalog.
    Schema,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::exit::CONFIG as u8 } else { 0 });
        }
    };
    match args.command {
        Command::Schema => {
            cli::print(&cli::schema());
            ExitCode::SUCCESS
        }
        Command::Run { config, set } => {
            if let Err(e) = cli::init_threads() {
                eprintln!("{e}");
                return ExitCode::from(cli::exit::CONFIG as u8);
            }
            match cli::load_config(&config, &set) {
                Ok(cfg) => ExitCode::from(cli::run(&cfg) as u8),
                Err((code, msg)) => {
                    eprintln!("{msg}");
                    ExitCode::from(code as u8)
                }
            }
        }
    }
}
