fn main() {
    std::process::exit(mpcr_cli::run(std::env::args_os()));
}
