fn main() {
    std::process::exit(ctm_cli::run(std::env::args_os()));
}
