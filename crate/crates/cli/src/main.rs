use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(superstat_cli::run(std::env::args_os()))
}
