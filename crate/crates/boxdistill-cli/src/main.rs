//! `boxdistill` command-line tool: thin adapters over the library operations
//! plus the interchange formats. No numeric logic lives here.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::{Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // a failed build means a pool already exists (tests); that is fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // machine-readable error record on stderr
            let record = serde_json::json!({
                "error": err.kind(),
                "message": err.to_string(),
            });
            eprintln!("{record}");
            ExitCode::from(err.exit_code())
        }
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}
