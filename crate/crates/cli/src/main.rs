fn main() {
    std::process::exit(causalwb_cli::run(std::env::args_os()));
}
