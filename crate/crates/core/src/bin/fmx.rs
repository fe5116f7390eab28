fn main() {
    env_logger::init();
    std::process::exit(freqmix::cli::run(std::env::args_os()));
}
