fn main() {
    std::process::exit(hdcov::cli::main_entry());
}
