fn main() {
    std::process::exit(chronoverify::cli::main_with(std::env::args_os()));
}
