use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mslmix::cli::run() as u8)
}
