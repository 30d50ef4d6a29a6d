fn main() {
    std::process::exit(qlqr_cli::parse_and_dispatch(std::env::args_os()));
}
