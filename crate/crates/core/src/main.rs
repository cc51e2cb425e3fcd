fn main() {
    std::process::exit(eltrack::cli::run(std::env::args_os()));
}
