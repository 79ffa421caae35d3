fn main() {
    std::process::exit(sgd_rates::cli::main());
}
