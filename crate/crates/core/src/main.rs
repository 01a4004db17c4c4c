fn main() {
    std::process::exit(congest_mst::cli::main_with(std::env::args()));
}
