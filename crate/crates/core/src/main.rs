fn main() {
    std::process::exit(scsieve::cli::run(std::env::args_os()));
}
