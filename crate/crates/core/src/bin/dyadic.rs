fn main() {
    std::process::exit(dyadic::cli::run(std::env::args_os()));
}
