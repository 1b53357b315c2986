fn main() {
    env_logger::init();
    std::process::exit(dagfm_cli::run(std::env::args_os()));
}
