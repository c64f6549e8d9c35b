fn main() {
    std::process::exit(tilekmc::cli::run(std::env::args_os()));
}
