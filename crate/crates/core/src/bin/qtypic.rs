fn main() {
    std::process::exit(qtypic::cli::main_with_args(std::env::args_os()));
}
