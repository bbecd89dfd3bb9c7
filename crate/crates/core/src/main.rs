fn main() -> std::process::ExitCode {
    trunk_core::cli::main()
}
