fn main() {
    std::process::exit(pwcycles::cli::run(std::env::args_os()));
}
