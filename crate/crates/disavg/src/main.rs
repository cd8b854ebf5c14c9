fn main() {
    std::process::exit(disavg::run_cli());
}
