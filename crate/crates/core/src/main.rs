fn main() {
    std::process::exit(padic_wander::cli::run(std::env::args_os()));
}
