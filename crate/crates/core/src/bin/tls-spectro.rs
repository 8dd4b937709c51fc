fn main() {
    std::process::exit(tls_spectro::cli::run(std::env::args_os()));
}
