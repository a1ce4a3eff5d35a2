fn main() {
    std::process::exit(burnscope_cli::run(std::env::args_os()));
}
