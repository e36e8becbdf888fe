fn main() {
    std::process::exit(mathkg_cli::run(std::env::args_os()));
}
