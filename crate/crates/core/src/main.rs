fn main() {
    std::process::exit(ctxcompress::cli::run(std::env::args_os()));
}
