use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use magnus_lq_cli::commands::{self, run_exit_code};
use magnus_lq_cli::config::parse_family;
use magnus_lq_cli::CliResult;

#[derive(Parser)]
#[command(name = "magnus-lq", version, about = "Riccati-based optimal control benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its trajectory CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the eight quadrotor schemes and print the comparison table.
    Table2 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scalar Riccati problem with sigmoid drift: p(t) and x(t) per method.
    ScalarDemo {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Observed order of a family on the smooth scalar problem.
    Convergence {
        #[arg(long)]
        family: String,
        /// Comma-separated step sizes, e.g. 0.1,0.05,0.025.
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025, 0.0125])]
        h: Vec<f64>,
    },
}

fn execute(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Run { config } => {
            let (out, path) = commands::cmd_run(&config)?;
            println!("{}", out.summary);
            eprintln!("wrote {}", path.display());
            Ok(run_exit_code(&out.summary))
        }
        Command::Table2 { out } => {
            let rows = commands::cmd_table2(out.as_deref())?;
            print!("{}", commands::render_table2(&rows));
            Ok(0)
        }
        Command::ScalarDemo { out } => {
            let series = commands::cmd_scalar_demo(out.as_deref())?;
            print!("{}", commands::render_scalar_demo(&series));
            Ok(0)
        }
        Command::Convergence { family, h } => {
            let family = parse_family(&family)?;
            let rows = commands::cmd_convergence(family, &h)?;
            print!("{}", commands::render_convergence(family, &rows));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
