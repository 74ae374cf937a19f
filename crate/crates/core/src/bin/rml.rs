fn main() -> std::process::ExitCode {
    rml_core::harness::cli::main()
}
