fn main() -> std::process::ExitCode {
    plotguide::cli::main()
}
