fn main() {
    std::process::exit(softtime::run_cli());
}
