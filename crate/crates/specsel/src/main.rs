fn main() {
    std::process::exit(specsel::pipeline::cli::run());
}
