fn main() {
    std::process::exit(griddy_core::cli::run_cli(std::env::args_os()));
}
