use std::io::{self, Write};
use std::process::ExitCode;

use aoi_core::cli;

fn main() -> ExitCode {
    if let Err(e) = cli::configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(cli::EXIT_USAGE as u8);
    }
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = cli::execute(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    ExitCode::from(code as u8)
}
