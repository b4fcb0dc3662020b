use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(epi_curing::cli::run(std::env::args()) as u8)
}
