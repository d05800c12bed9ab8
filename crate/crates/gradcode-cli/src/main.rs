fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GRADCODE_LOG")).init();
    std::process::exit(gradcode_cli::run(std::env::args()));
}
