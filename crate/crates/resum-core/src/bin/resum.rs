fn main() {
    std::process::exit(resum_core::cli::dispatch(std::env::args_os()));
}
