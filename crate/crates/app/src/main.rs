fn main() {
    std::process::exit(stylecurve_app::cli::run(std::env::args_os()));
}
