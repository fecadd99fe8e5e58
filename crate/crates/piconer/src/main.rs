fn main() {
    std::process::exit(piconer::cli::run(std::env::args_os()));
}
