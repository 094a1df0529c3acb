fn main() -> std::process::ExitCode {
    wdrop::cli::main_with_args(std::env::args_os())
}
