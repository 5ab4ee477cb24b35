fn main() {
    std::process::exit(spinlab_cli::run(std::env::args_os()));
}
