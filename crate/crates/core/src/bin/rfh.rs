fn main() {
    std::process::exit(rfh::cli::run(std::env::args_os()));
}
