fn main() {
    std::process::exit(diarkit_cli::run(std::env::args_os()));
}
