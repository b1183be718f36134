fn main() {
    std::process::exit(gnnbench::cli::main_with_args(std::env::args_os()));
}
