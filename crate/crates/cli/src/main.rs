use clap::Parser;

fn main() {
    let cli = noisyqed_cli::Cli::parse();
    std::process::exit(noisyqed_cli::run(cli));
}
