use std::io;
use std::process::ExitCode;

use clap::Parser;
use ctrlrank::app::{run, Cli, Io};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut stdin, mut stdout, mut stderr) = (io::stdin().lock(), io::stdout().lock(), io::stderr().lock());
    let code = run(&cli, &mut Io { stdin: &mut stdin, stdout: &mut stdout, stderr: &mut stderr });
    ExitCode::from(code as u8)
}
