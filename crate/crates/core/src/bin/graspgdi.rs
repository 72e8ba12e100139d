fn main() {
    std::process::exit(graspgdi::harness::cli::run(std::env::args_os()));
}
