fn main() {
    std::process::exit(synspace_cli::run(std::env::args_os()));
}
