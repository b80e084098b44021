fn main() {
    std::process::exit(bbb_cli::run(std::env::args_os()));
}
