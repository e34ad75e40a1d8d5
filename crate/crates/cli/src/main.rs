fn main() {
    std::process::exit(cutlab_core::harness::cli::dispatch(std::env::args_os()));
}
