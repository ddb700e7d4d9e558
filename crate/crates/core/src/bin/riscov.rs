fn main() {
    std::process::exit(riscov::cli::run(std::env::args_os()));
}
