fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    pluripot::cli::init_threads();
    std::process::exit(pluripot::cli::run(std::env::args_os()));
}
