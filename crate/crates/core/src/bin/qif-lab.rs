fn main() {
    std::process::exit(qif_lab::cli::run(std::env::args_os()));
}
