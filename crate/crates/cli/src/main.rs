use std::io::{self, IsTerminal};
use std::path::Path;
use std::process::ExitCode;

use soccerrag_cli::{run, Io, EXIT_FAILURE};
use soccerrag_core::config::merged_env;

fn main() -> ExitCode {
    let env = match merged_env(Path::new("."), std::env::vars()) {
        Ok(env) => env,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE as u8);
        }
    };
    let stdin = io::stdin();
    let echo_input = !stdin.is_terminal();
    let mut stdin = stdin.lock();
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr().lock();
    let mut io = Io {
        stdin: &mut stdin,
        stdout: &mut stdout,
        stderr: &mut stderr,
        echo_input,
    };
    let code = run(std::env::args_os(), &env, &mut io);
    ExitCode::from(code as u8)
}
