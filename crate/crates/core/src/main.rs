fn main() -> std::process::ExitCode {
    fdl::cli::main()
}
