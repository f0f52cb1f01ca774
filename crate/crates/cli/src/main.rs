fn main() {
    std::process::exit(kfx_cli::run(std::env::args_os()));
}
