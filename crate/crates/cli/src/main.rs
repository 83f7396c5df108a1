fn main() {
    std::process::exit(timecomp_cli::run(std::env::args_os()));
}
