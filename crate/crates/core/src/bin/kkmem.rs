fn main() -> std::process::ExitCode {
    kkmembrane::cli::main_from_env()
}
