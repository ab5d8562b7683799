fn main() {
    std::process::exit(loadshape::cli::run(std::env::args_os()));
}
