fn main() {
    std::process::exit(chshrng::cli::main_with_args(std::env::args_os()));
}
