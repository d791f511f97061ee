fn main() {
    std::process::exit(ridgeless_cli::run(std::env::args_os()));
}
