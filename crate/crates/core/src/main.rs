fn main() { std::process::exit(esfem::cli::main()); }
