fn main() {
    std::process::exit(erm_core::cli::run(std::env::args_os()));
}
