use clap::Parser;

fn main() {
    let cli = fedkl::cli::Cli::parse();
    std::process::exit(fedkl::cli::run(cli));
}
