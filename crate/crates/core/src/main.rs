fn main() {
    std::process::exit(sparqa::cli::run_cli(std::env::args_os()));
}
