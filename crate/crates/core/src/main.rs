use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(olsrv2_sim::cli::main_with_args(std::env::args()) as u8)
}
