fn main() -> std::process::ExitCode {
    tvh::cli::main()
}
