fn main() {
    std::process::exit(vw4c::cli::run(std::env::args_os()));
}
