fn main() {
    std::process::exit(pseudoiid_cli::main_with_args(std::env::args_os()));
}
