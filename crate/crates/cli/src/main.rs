fn main() {
    std::process::exit(aa_cli::run(std::env::args_os()));
}
