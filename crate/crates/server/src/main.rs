fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = sketchloop::cli::run(std::env::args_os(), &mut stdout) {
        eprintln!("{}", e.to_json_line());
        std::process::exit(e.code);
    }
}
