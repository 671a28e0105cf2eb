fn main() {
    std::process::exit(rnng_cli::run(std::env::args_os()));
}
