fn main() {
    std::process::exit(lorenzlab::run(std::env::args_os()));
}
