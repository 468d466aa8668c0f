fn main() {
    std::process::exit(vqmc::cli::main());
}
