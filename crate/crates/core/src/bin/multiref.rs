use std::process::ExitCode;

fn main() -> ExitCode {
    multiref::cli::main_with_args(std::env::args_os())
}
