fn main() {
    std::process::exit(hybridts::cli::main_with(std::env::args_os()));
}
