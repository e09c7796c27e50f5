fn main() {
    std::process::exit(beamtree::cli::main_with_args(std::env::args_os()));
}
