fn main() {
    std::process::exit(artaug::cli::run(std::env::args_os()));
}
