fn main() {
    std::process::exit(idbench::harness::cli::cli_entry(std::env::args_os()));
}
