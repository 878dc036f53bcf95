fn main() {
    std::process::exit(dyadic_energy::cli::run(std::env::args_os()));
}
