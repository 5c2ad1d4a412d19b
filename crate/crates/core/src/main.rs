fn main() {
    std::process::exit(msa_lab::cli::main_with_args(std::env::args_os()));
}
