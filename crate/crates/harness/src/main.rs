fn main() {
    std::process::exit(maser_bench::cli::run(std::env::args_os()));
}
