fn main() {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let code = ttmc::app::main_with(std::env::args(), &mut out, &mut err);
    std::process::exit(code);
}
