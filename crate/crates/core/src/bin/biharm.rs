fn main() {
    let code = biharm_core::cli::run_main(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
