fn main() {
    std::process::exit(epdic::cli::cli_dispatch(std::env::args_os()));
}
