fn main() {
    std::process::exit(lgdlab_cli::dispatch(std::env::args_os()));
}
