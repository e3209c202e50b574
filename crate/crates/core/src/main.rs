fn main() {
    std::process::exit(scalestereo::cli::run());
}
