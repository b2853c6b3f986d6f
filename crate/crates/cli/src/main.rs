fn main() {
    std::process::exit(bounce_cli::run(std::env::args_os()));
}
