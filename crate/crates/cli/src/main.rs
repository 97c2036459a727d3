use std::process::ExitCode;

fn main() -> ExitCode {
    hallway_loc_cli::init_logging();
    ExitCode::from(hallway_loc_cli::run(std::env::args_os()))
}
