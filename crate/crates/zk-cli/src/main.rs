fn main() {
    let code = zk_cli::run(std::env::args().skip(1));
    std::process::exit(code);
}
