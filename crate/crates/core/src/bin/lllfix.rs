use std::process::ExitCode;

use lllfix::cli;

fn main() -> ExitCode {
    let level = cli::log_level(std::env::var("LLL_LOG").ok().as_deref());
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    let code = cli::run_with_args(std::env::args_os());
    ExitCode::from(code as u8)
}
