fn main() {
    std::process::exit(anot::cli::run(std::env::args_os()));
}
