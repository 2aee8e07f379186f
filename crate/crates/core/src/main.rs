fn main() {
    std::process::exit(bsct_lab::cli::main_entry(std::env::args_os()));
}
