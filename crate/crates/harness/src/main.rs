use clap::Parser;
use genctrl::Cli;

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    genctrl::cli::run(&Cli::parse())
}
