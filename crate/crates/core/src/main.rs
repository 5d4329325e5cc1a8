fn main() { std::process::exit(ergolab::cli::main_entry()); }
