fn main() {
    let argv: Vec<String> = std::env::args().collect();
    if let Err(e) = spatial_cpl::cli::run(&argv) {
        eprintln!("spcpl: {e}");
        std::process::exit(e.exit_code());
    }
}
