fn main() {
    std::process::exit(wavelet_plm::cli::run(std::env::args_os()));
}
