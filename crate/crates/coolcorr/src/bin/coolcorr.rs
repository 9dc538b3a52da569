fn main() {
    std::process::exit(coolcorr::cli::main_with_args(std::env::args_os()));
}
