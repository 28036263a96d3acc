fn main() {
    std::process::exit(dbfl::cli::run_cli(std::env::args_os()));
}
