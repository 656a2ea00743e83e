use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qcqp_exact::commands::{self, CheckOptions, McOptions, Output, RelaxChoice, SweepOptions, EXIT_USAGE};
use qcqp_exact::generate::Scheme;
use qcqp_exact::instance_file::read_instance;
use qcqp_exact::CliError;

#[derive(Parser)]
#[command(name = "qcqp-exact", version, about = "Exactness checks for Shor relaxations of diagonal QCQPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Relaxation {
    Conv,
    Newconv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Gaussian,
    Signdef,
    BallLinear,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Gaussian => Scheme::Gaussian,
            SchemeArg::Signdef => Scheme::SignDef,
            SchemeArg::BallLinear => Scheme::BallLinear,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the condition ladder; exit 10 if some condition proves exactness, 11 otherwise.
    Check {
        #[arg(long)]
        instance: String,
        /// Comma-separated condition tags, e.g. `M2,H1Refined`.
        #[arg(long)]
        conditions: Option<String>,
        #[arg(long)]
        exhaustive: bool,
        /// Include the power-set enumeration.
        #[arg(long)]
        powerset: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a convex relaxation.
    Solve {
        #[arg(long)]
        instance: String,
        #[arg(long, value_enum, default_value = "conv")]
        relaxation: Relaxation,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Brute-force global minimum (n ≤ 4).
    Oracle {
        #[arg(long)]
        instance: String,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        refine: Option<usize>,
    },
    /// Compare the relaxation value with the oracle.
    Verify {
        #[arg(long)]
        instance: String,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Sweep one scalar of the instance and tabulate every verdict as CSV.
    Sweep {
        #[arg(long)]
        instance: String,
        /// Scalar to vary, e.g. `constraints[1].b`.
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        with_oracle: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit a random instance.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value = "gaussian")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo frequency of certified exactness as CSV.
    Mc {
        /// Comma-separated sizes, e.g. `2,5,10,20`.
        #[arg(long)]
        n_list: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, value_enum, default_value = "gaussian")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cmd: Command) -> Result<Output, CliError> {
    match cmd {
        Command::Check { instance, conditions, exhaustive, powerset, tol, seed } => {
            let q = read_instance(&instance)?;
            let conditions = conditions.as_deref().map(commands::parse_conditions).transpose()?;
            Ok(commands::cmd_check(&q, &CheckOptions { conditions, exhaustive, powerset, tol, seed }))
        }
        Command::Solve { instance, relaxation, tol } => {
            let q = read_instance(&instance)?;
            let which = match relaxation {
                Relaxation::Conv => RelaxChoice::Conv,
                Relaxation::Newconv => RelaxChoice::NewConv,
            };
            commands::cmd_solve(&q, which, tol)
        }
        Command::Oracle { instance, grid, refine } => commands::cmd_oracle(&read_instance(&instance)?, grid, refine),
        Command::Verify { instance, tol } => commands::cmd_verify(&read_instance(&instance)?, tol),
        Command::Sweep { instance, param, from, to, steps, with_oracle, tol, seed } => {
            let q = read_instance(&instance)?;
            commands::cmd_sweep(&q, &SweepOptions { param, from, to, steps, with_oracle, tol, seed })
        }
        Command::Random { n, m, scheme, seed } => commands::cmd_random(n, m, scheme.into(), seed),
        Command::Mc { n_list, m, trials, scheme, seed } => {
            let n_list = n_list
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad size `{}` in --n-list", s))))
                .collect::<Result<Vec<_>, _>>()?;
            commands::cmd_mc(&McOptions { n_list, m, trials, scheme: scheme.into(), seed })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
