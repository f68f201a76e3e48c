fn main() {
    std::process::exit(rfiqa::cli::run(std::env::args_os()));
}
