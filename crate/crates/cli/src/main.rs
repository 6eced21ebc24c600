fn main() {
    std::process::exit(twb::run(std::env::args_os()));
}
