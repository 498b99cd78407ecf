fn main() {
    env_logger::init();
    std::process::exit(autowalk::harness::cli::run(std::env::args_os()));
}
