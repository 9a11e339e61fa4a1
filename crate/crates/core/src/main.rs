fn main() {
    std::process::exit(contract_forge::cli::run(std::env::args_os()));
}
