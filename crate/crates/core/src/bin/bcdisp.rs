fn main() {
    std::process::exit(bcdisp::cli::main_with_args(std::env::args_os()));
}
