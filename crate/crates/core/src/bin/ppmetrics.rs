fn main() {
    std::process::exit(ppmetrics::cli::main_with_args(std::env::args_os()));
}
