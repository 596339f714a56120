fn main() {
    std::process::exit(bohmgrid::cli::main_with_args(std::env::args_os()));
}
