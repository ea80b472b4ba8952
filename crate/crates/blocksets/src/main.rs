fn main() -> std::process::ExitCode {
    blocksets::cli::main()
}
