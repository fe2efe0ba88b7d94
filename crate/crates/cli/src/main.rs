fn main() {
    std::process::exit(pnflow::run(std::env::args_os()));
}
