fn main() {
    std::process::exit(ultracomb::experiment::main_with_args(std::env::args_os()));
}
