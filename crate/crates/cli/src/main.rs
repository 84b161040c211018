fn main() {
    std::process::exit(dikin::run(std::env::args_os()));
}
