fn main() -> std::process::ExitCode {
    qdeficiency::cli::main()
}
