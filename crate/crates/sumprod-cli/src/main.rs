fn main() {
    std::process::exit(sumprod_cli::run(std::env::args_os()));
}
