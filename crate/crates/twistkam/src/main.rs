fn main() {
    std::process::exit(twistkam::cli::run());
}
