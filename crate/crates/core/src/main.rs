fn main() {
    std::process::exit(dplab::cli::dispatch(std::env::args_os()));
}
