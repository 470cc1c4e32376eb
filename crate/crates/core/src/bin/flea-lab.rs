fn main() {
    std::process::exit(flea_lab::cli::run(std::env::args_os()));
}
