fn main() {
    std::process::exit(passage_lab::cli::main_entry());
}
