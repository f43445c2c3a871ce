fn main() {
    std::process::exit(growthnet_cli::run(std::env::args_os()));
}
