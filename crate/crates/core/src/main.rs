fn main() {
    std::process::exit(icm_bayes::cli::main_with_args(std::env::args_os()));
}
