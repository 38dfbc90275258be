fn main() {
    std::process::exit(fll_multipath_cli::run());
}
