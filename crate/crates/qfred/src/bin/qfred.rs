fn main() {
    std::process::exit(qfred::cli::main_with_args(std::env::args_os()));
}
