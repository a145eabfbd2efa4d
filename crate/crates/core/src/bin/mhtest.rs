use clap::Parser;

fn main() {
    let cli = mhtest_core::cli::Cli::parse();
    if let Err(e) = mhtest_core::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
