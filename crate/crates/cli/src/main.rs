//! `starszego` command-line front end.

mod commands;
mod report;
mod symbols;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::RunConfig;
use report::{Format, Report};
use starszego::asymptotics::Orders;
use starszego::Error;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use symbols::SymbolSpec;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_ASSERT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "starszego", version, about = "Finite-section oracles and Szego-type predictions for star-Toeplitz determinants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// log det T_n per n.
    Logdet(Common),
    /// Oracle minus prediction per sweep point, with rate fits.
    Compare(Common),
    /// Both sides of the Borodin-Okounkov identity.
    Bocg(Common),
    /// Wiener-Hopf factor coefficients at lattice points x = n.
    Factorize(Common),
    /// det T_n / det T_{n-1} against the factor prediction.
    WeakRatio(Common),
    /// Randomized star-product check, seeded by --seed.
    StarCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        trials: usize,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Catalogue name or JSON definition file.
    #[arg(long)]
    symbol: Option<String>,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    n: Vec<usize>,
    /// Comma-separated semiclassical parameters (example3).
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    nu: Vec<f64>,
    /// Comma-separated symbol parameters (omega, t or eps).
    #[arg(long, value_delimiter = ',')]
    param: Vec<f64>,
    /// Semiclassical terms to include.
    #[arg(long, default_value = "d0,d2,c0,c1")]
    orders: String,
    /// BCH order for the exact strong formula.
    #[arg(long, default_value_t = 2)]
    bch: u8,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Exit with status 4 when a check exceeds its tolerance.
    #[arg(long)]
    assert: bool,
    /// Tolerance override (also read from STARSZEGO_TOL).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the assembled matrix (logdet, single point) plus a JSON sidecar.
    #[arg(long)]
    export: Option<PathBuf>,
}

fn config(c: &Common, needs_symbol: bool) -> Result<RunConfig, Error> {
    if c.n.contains(&0) {
        return Err(Error::Input("n values must be positive".into()));
    }
    if c.nu.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Input("nu values must be positive".into()));
    }
    let tolerance = match (c.tol, std::env::var("STARSZEGO_TOL")) {
        (Some(t), _) => Some(t),
        (None, Ok(s)) => Some(s.trim().parse::<f64>().map_err(|_| Error::Input(format!("STARSZEGO_TOL={s:?} is not a number")))?),
        (None, Err(_)) => None,
    };
    if tolerance.is_some_and(|t| !(t > 0.0)) {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    let symbol = match &c.symbol {
        Some(s) => Some(SymbolSpec::resolve(s)?),
        None if needs_symbol => return Err(Error::Input("--symbol is required".into())),
        None => None,
    };
    Ok(RunConfig {
        symbol,
        ns: c.n.clone(),
        nus: c.nu.clone(),
        params: c.param.clone(),
        orders: Orders::parse(&c.orders)?,
        tolerance,
        assert: c.assert,
        jobs: c.jobs,
        seed: c.seed,
        bch: c.bch,
        export: c.export.clone(),
    })
}

fn emit(rep: &Report, c: &Common) -> std::io::Result<()> {
    let format = match c.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    };
    match &c.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            rep.write(format, &mut f)?;
            f.flush()
        }
        None => rep.write(format, &mut std::io::stdout().lock()),
    }
}

fn run(cli: &Cli) -> Result<(Report, &Common), Error> {
    let (common, result) = match &cli.command {
        Command::Logdet(c) => (c, config(c, true).and_then(|cfg| commands::logdet_cmd(&cfg))),
        Command::Compare(c) => (c, config(c, true).and_then(|cfg| commands::compare_cmd(&cfg))),
        Command::Bocg(c) => (c, config(c, true).and_then(|cfg| commands::bocg_cmd(&cfg))),
        Command::Factorize(c) => (c, config(c, true).and_then(|cfg| commands::factorize_cmd(&cfg))),
        Command::WeakRatio(c) => (c, config(c, true).and_then(|cfg| commands::weak_ratio_cmd(&cfg))),
        Command::StarCheck { common, trials } => (common, config(common, false).and_then(|cfg| commands::star_check_cmd(&cfg, *trials))),
    };
    result.map(|r| (r, common))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((rep, common)) => {
            if let Err(e) = emit(&rep, common) {
                eprintln!("starszego: writing report: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            if rep.assert_enabled && !rep.passed() {
                for c in rep.checks.iter().filter(|c| !c.passed()) {
                    eprintln!("starszego: check failed: {} = {:e} > {:e}", c.name, c.value, c.tolerance);
                }
                return ExitCode::from(EXIT_ASSERT);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("starszego: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG })
        }
    }
}
