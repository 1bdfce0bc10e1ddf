fn main() {
    std::process::exit(fibxy_cli::main_with(std::env::args_os()));
}
