fn main() {
    std::process::exit(rmab::cli::parse_and_dispatch(std::env::args_os()));
}
