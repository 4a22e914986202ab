use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use lsspca_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli.command, &mut out) {
        Ok(_) => {
            let _ = out.flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = out.flush();
            eprintln!("lsspca: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
