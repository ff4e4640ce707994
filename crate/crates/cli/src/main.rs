fn main() {
    std::process::exit(iifs_cli::cli::execute(std::env::args_os()));
}
