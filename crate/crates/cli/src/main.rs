fn main() {
    std::process::exit(fovnoise_cli::run(std::env::args_os()));
}
