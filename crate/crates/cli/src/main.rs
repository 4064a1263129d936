fn main() {
    std::process::exit(conelab_cli::main_with_args(std::env::args_os()));
}
