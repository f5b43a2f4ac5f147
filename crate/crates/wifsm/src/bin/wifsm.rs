use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use wifsm::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share exit code 1 with configuration errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("wifsm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
