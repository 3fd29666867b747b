fn main() {
    std::process::exit(upwind_jump::cli::main_with_args(std::env::args_os()));
}
