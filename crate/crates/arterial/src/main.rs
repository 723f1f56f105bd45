fn main() {
    std::process::exit(arterial::cli::run());
}
