fn main() {
    std::process::exit(fracheat::cli::run(std::env::args_os()));
}
