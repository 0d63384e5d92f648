fn main() {
    std::process::exit(vlq_cli::run(std::env::args_os()));
}
