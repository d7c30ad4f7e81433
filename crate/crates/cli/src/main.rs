fn main() {
    std::process::exit(eve_sim::main_with_args(std::env::args_os()));
}
