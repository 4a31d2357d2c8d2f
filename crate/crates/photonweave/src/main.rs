fn main() {
    std::process::exit(photonweave::cli::main());
}
