fn main() {
    std::process::exit(aniso_rabi::cli::run(std::env::args_os()));
}
