fn main() {
    std::process::exit(ssalab::cli::run(std::env::args_os()));
}
