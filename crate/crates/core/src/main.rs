fn main() {
    std::process::exit(qexch::cli::main_with(std::env::args_os()));
}
