fn main() {
    std::process::exit(spm_dse::cli::run(std::env::args_os()));
}
