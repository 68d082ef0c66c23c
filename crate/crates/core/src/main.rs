fn main() {
    std::process::exit(sigshell::cli::run());
}
