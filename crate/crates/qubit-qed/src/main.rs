fn main() { std::process::exit(qubit_qed::cli::run(std::env::args_os())) }
