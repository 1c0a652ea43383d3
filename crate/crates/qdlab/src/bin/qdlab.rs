fn main() {
    std::process::exit(qdlab::cli::run(std::env::args().skip(1)));
}
