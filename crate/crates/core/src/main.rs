fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(ms_contact::cli::run(&argv));
}
