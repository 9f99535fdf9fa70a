fn main() {
    std::process::exit(rabicd::cli::run());
}
