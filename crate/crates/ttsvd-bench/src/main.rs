fn main() {
    std::process::exit(ttsvd_bench::cli::main_with(std::env::args_os()));
}
