fn main() {
    std::process::exit(tefield::cli::run(std::env::args_os()));
}
