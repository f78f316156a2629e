fn main() {
    std::process::exit(evmchaos_cli::run(std::env::args_os()));
}
