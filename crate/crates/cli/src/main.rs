use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use ylg_cli::commands::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let stderr = io::stderr();
    let code = match run(&cli.command, &mut out, &mut stderr.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ylg: {e}");
            e.exit_code()
        }
    };
    let _ = out.flush();
    ExitCode::from(code)
}
