use clap::Parser;

fn main() {
    let cli = qpresp_cli::Cli::parse();
    std::process::exit(qpresp_cli::run(&cli));
}
