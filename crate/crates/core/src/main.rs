fn main() {
    std::process::exit(rasch_spectral::cli::run(std::env::args_os()));
}
