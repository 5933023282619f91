use std::process::ExitCode;

fn main() -> ExitCode {
    usdn::cli::main_with_args(std::env::args_os())
}
