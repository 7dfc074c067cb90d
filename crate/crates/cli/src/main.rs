fn main() {
    std::process::exit(radsynth_cli::run(std::env::args_os()));
}
