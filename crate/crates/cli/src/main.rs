fn main() {
    std::process::exit(divasim_cli::run_from_args());
}
