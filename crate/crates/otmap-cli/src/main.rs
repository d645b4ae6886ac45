fn main() -> std::process::ExitCode {
    otmap_cli::run()
}
