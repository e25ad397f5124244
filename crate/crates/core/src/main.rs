fn main() { std::process::exit(rigid_consensus::cli::main_entry()) }
