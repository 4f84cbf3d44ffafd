fn main() {
    std::process::exit(mohanet_cli::run_cli(std::env::args_os()));
}
