fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(heisenberg_semigroups::cli::run(&args));
}
