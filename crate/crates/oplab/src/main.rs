use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use oplab::config::{OutputFormat, RunConfig};
use oplab::suite;
use oplab::Error;

#[derive(Parser)]
#[command(
    name = "oplab",
    about = "Verification lab for structured integral operators: identities, positivity, factorization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the tabular report (stdout gets the verdict).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format for --out.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Residual of the operator identity over the grid ladder.
    VerifyIdentity(CommonArgs),
    /// Residuals of the four component identities.
    Components(CommonArgs),
    /// Minimum eigenvalues: skew lower bound, radius family, shifted family.
    Positivity(CommonArgs),
    /// Inversion, triangular factorization, kernel export, nesting test.
    Factorize(CommonArgs),
    /// Independent reconstruction of S against the direct build.
    Crosscheck(CommonArgs),
    /// Residual ladder report without a pass threshold on the order.
    Converge(CommonArgs),
}

fn run(args: &CommonArgs, f: impl Fn(&RunConfig) -> oplab::Result<suite::CommandOutput>) -> ExitCode {
    let cfg = match RunConfig::from_path(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = match f(&cfg) {
        Ok(out) => out,
        Err(e) => {
            return match e {
                Error::Config(_) | Error::InvalidSpec(_) | Error::Json(_) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(2)
                }
                other => {
                    eprintln!("error: {other}");
                    ExitCode::from(1)
                }
            };
        }
    };

    println!("{}", out.verdict.to_json());

    let path = args.out.clone().or_else(|| cfg.output.as_ref().map(|o| PathBuf::from(&o.path)));
    if let (Some(path), Some(table)) = (path, &out.table) {
        let format = match args.format {
            Some(FormatArg::Csv) => OutputFormat::Csv,
            Some(FormatArg::Json) => OutputFormat::Json,
            None => cfg.output.as_ref().map(|o| o.format).unwrap_or(OutputFormat::Csv),
        };
        if let Err(e) = table.write_to(&path, format) {
            eprintln!("failed to write table: {e}");
            return ExitCode::from(1);
        }
    }

    if out.verdict.overall {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::VerifyIdentity(a) => run(a, suite::cmd_verify_identity),
        Command::Components(a) => run(a, suite::cmd_components),
        Command::Positivity(a) => run(a, suite::cmd_positivity),
        Command::Factorize(a) => run(a, suite::cmd_factorize),
        Command::Crosscheck(a) => run(a, suite::cmd_crosscheck),
        Command::Converge(a) => run(a, suite::cmd_converge),
    }
}
