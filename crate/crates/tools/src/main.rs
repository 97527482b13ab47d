fn main() -> std::process::ExitCode {
    mvgan_tools::cli::main()
}
