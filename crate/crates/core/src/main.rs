use clap::Parser;

fn main() {
    let args = nvpump::cli::Args::parse();
    std::process::exit(nvpump::cli::main_with(&args));
}
