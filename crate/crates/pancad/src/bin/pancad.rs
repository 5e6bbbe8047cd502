fn main() { std::process::exit(pancad::cli::run(std::env::args())) }
