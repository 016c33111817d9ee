fn main() {
    std::process::exit(graphboost_cli::run(std::env::args_os()));
}
