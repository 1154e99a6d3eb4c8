fn main() {
    std::process::exit(hodoflow::cli::run(std::env::args_os()));
}
