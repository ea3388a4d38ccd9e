fn main() {
    std::process::exit(dpconverse_cli::main_with_args(std::env::args_os()));
}
