fn main() {
    std::process::exit(affabs_cli::run(std::env::args_os()));
}
