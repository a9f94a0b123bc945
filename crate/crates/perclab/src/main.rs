fn main() {
    std::process::exit(perclab::lab::cli_main(std::env::args()));
}
