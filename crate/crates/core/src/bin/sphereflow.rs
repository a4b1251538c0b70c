fn main() {
    std::process::exit(sphereflow::cli::main_with_args(std::env::args_os()));
}
