use std::process::ExitCode;

fn main() -> ExitCode {
    planeguide::cli::main_from(std::env::args_os())
}
