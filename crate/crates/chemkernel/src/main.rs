fn main() {
    std::process::exit(chemkernel::cli::run(std::env::args_os()));
}
