use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GAITSCORE_LOG")).init();
    let cli = gaitscore::cli::Cli::parse();
    if let Err(e) = gaitscore::cli::run(cli) {
        eprintln!("error: {}", e);
        std::process::exit(1);
    }
}
