fn main() {
    std::process::exit(hch_cli::run_cli(std::env::args_os()));
}
