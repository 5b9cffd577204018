fn main() {
    std::process::exit(a2b_cli::run(std::env::args_os()));
}
