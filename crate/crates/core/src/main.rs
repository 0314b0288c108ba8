fn main() {
    std::process::exit(qsim::cli::main_with_args(std::env::args_os()));
}
