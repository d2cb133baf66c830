fn main() {
    std::process::exit(mhdmap_cli::app::main_with_args(std::env::args_os()));
}
