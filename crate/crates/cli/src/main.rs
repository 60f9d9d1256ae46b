fn main() {
    std::process::exit(nanofiber_cli::run_from(std::env::args_os()));
}
