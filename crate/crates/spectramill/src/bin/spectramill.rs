fn main() {
    std::process::exit(spectramill::cli::main());
}
