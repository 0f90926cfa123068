fn main() {
    std::process::exit(mishbench_cli::main_with_args(std::env::args_os()));
}
