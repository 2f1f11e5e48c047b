fn main() {
    std::process::exit(bse_core::cli::run(std::env::args_os()));
}
