fn main() {
    std::process::exit(lmnet::interface::run(std::env::args_os()));
}
