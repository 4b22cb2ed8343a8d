fn main() {
    std::process::exit(qutrit_transfer::cli::main_with_env());
}
