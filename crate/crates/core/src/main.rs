fn main() -> std::process::ExitCode {
    infoselect::cli::run()
}
