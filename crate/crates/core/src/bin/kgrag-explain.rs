fn main() {
    std::process::exit(kgrag_explain::cli::run(std::env::args_os()));
}
