fn main() {
    std::process::exit(pels::cli::main_from_env());
}
