fn main() {
    std::process::exit(mcvar::cli::main_with_args(std::env::args_os()));
}
