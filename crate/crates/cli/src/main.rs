use std::process::ExitCode;

use clap::Parser;
use poptlab_cli::{exit, run, write_atomic, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::FAILURE as u8 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            for d in &out.diagnostics {
                eprintln!("poptlab: {d}");
            }
            let written = match &cli.config.output {
                Some(path) => write_atomic(path, &out.body),
                None => {
                    use std::io::Write;
                    std::io::stdout().lock().write_all(out.body.as_bytes())
                }
            };
            if let Err(e) = written {
                eprintln!("poptlab: cannot write report: {e}");
                return ExitCode::from(exit::FAILURE as u8);
            }
            ExitCode::from(out.code as u8)
        }
        Err(f) => {
            eprintln!("poptlab: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
