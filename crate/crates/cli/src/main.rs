fn main() {
    std::process::exit(hdbo_cli::run(std::env::args_os()));
}
