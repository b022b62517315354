fn main() {
    std::process::exit(synstarts_cli::run(std::env::args().collect()));
}
