fn main() {
    std::process::exit(prefattach::cli::main_with_args(std::env::args_os()));
}
