fn main() {
    std::process::exit(mpiforge::cli::run(std::env::args_os()));
}
