mod commands;
mod dsl;
mod output;

use std::io::{self, Write};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use multibias::oracle::WorldConfig;
use multibias::Measure;

use commands::{parse_assignment, parse_vary, EstimateArgs, Invalid, Vary, VerifyFormat};
use output::Format;

#[derive(Parser)]
#[command(
    name = "multibias",
    version,
    about = "Bounds and E-values for multiple biases in risk ratios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

const BIASES_HELP: &str = "Biases in declaration order, e.g. \
    \"confounding + selection(general, increased_risk) + misclassification(exposure, rare_outcome)\"";

#[derive(Subcommand)]
enum Command {
    /// Upper bound on the bias factor for given parameter values
    Bound {
        #[arg(long, help = BIASES_HELP)]
        biases: String,
        /// Parameter value, repeatable
        #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_assignment)]
        params: Vec<(String, f64)>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Multi-bias E-value for an effect estimate and its confidence limits
    Evalue {
        #[arg(long, help = BIASES_HELP)]
        biases: String,
        /// Point estimate
        #[arg(long)]
        est: f64,
        #[arg(long, value_enum, default_value_t = MeasureArg::Rr)]
        measure: MeasureArg,
        /// The outcome is rare (odds and hazard ratios then approximate risk ratios)
        #[arg(long)]
        rare: bool,
        /// Lower confidence limit
        #[arg(long)]
        lo: Option<f64>,
        /// Upper confidence limit
        #[arg(long)]
        hi: Option<f64>,
        /// True value to shift the estimate to, on the estimate's scale
        #[arg(long = "true", default_value_t = 1.0)]
        true_value: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Sensitivity parameters implied by a set of biases
    Summary {
        #[arg(long, help = BIASES_HELP)]
        biases: String,
        /// Include LaTeX notation
        #[arg(long)]
        latex: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Bounds over a two-way grid of parameter values
    Grid {
        #[arg(long, help = BIASES_HELP)]
        biases: String,
        /// Parameter to vary: NAME=start:stop:step or NAME=v1,v2,...; give twice (rows, then columns)
        #[arg(long, value_parser = parse_vary, num_args = 1, required = true)]
        vary: Vec<Vary>,
        /// Fixed parameter value, repeatable
        #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_assignment)]
        params: Vec<(String, f64)>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Point E-values over a range of observed risk ratios, one series per bias set
    Curve {
        /// Bias sets separated by `;` or by commas outside parentheses
        #[arg(long)]
        bias_sets: String,
        #[arg(long, default_value_t = 1.0)]
        rr_min: f64,
        #[arg(long, default_value_t = 7.0)]
        rr_max: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Check bounds against exactly enumerated random worlds
    Verify {
        /// result1, result2, result3, or a bias list
        #[arg(long, default_value = "result1")]
        structure: String,
        #[arg(long, default_value_t = 1000)]
        worlds: usize,
        /// Seed of the first world; later worlds use consecutive seeds
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cap on every stratum's outcome risk (result2 defaults to 0.01)
        #[arg(long)]
        rare_ceiling: Option<f64>,
        /// Cap on the recorded exposure probability, for rare-exposure bias sets
        #[arg(long)]
        rare_exposure_ceiling: Option<f64>,
        /// Levels of the unmeasured confounder (2 or 3)
        #[arg(long, default_value_t = 2)]
        confounder_levels: usize,
        /// Levels of the selection factor (2 or 3)
        #[arg(long, default_value_t = 2)]
        selection_levels: usize,
        #[arg(long, value_enum, default_value_t = VerifyFormat::Jsonl)]
        format: VerifyFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    #[value(name = "RR", alias = "rr")]
    Rr,
    #[value(name = "OR", alias = "or")]
    Or,
    #[value(name = "HR", alias = "hr")]
    Hr,
}

impl MeasureArg {
    fn with_rarity(self, rare: bool) -> Measure {
        match self {
            MeasureArg::Rr => Measure::RiskRatio,
            MeasureArg::Or => Measure::OddsRatio { rare_outcome: rare },
            MeasureArg::Hr => Measure::HazardRatio { rare_outcome: rare },
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Bound {
            biases,
            params,
            format,
        } => commands::bound(&commands::bias_set(&biases)?, &params, format, out),
        Command::Evalue {
            biases,
            est,
            measure,
            rare,
            lo,
            hi,
            true_value,
            format,
        } => {
            let set = commands::bias_set(&biases)?;
            let args = EstimateArgs {
                est,
                measure: measure.with_rarity(rare),
                lo,
                hi,
                true_value,
            };
            commands::evalue(&set, &args, format, out, err)
        }
        Command::Summary {
            biases,
            latex,
            format,
        } => commands::summary(&commands::bias_set(&biases)?, latex, format, out),
        Command::Grid {
            biases,
            vary,
            params,
            format,
        } => {
            let [rows, cols] = &vary[..] else {
                return commands::invalid(format!(
                    "--vary must be given exactly twice (rows, then columns), got {}",
                    vary.len()
                ));
            };
            commands::grid(
                &commands::bias_set(&biases)?,
                rows,
                cols,
                &params,
                format,
                out,
            )
        }
        Command::Curve {
            bias_sets,
            rr_min,
            rr_max,
            points,
            format,
        } => {
            let sets = commands::bias_sets(&bias_sets)?;
            let rr = commands::linspace(rr_min, rr_max, points)?;
            commands::curve(&sets, &rr, format, out)
        }
        Command::Verify {
            structure,
            worlds,
            seed,
            rare_ceiling,
            rare_exposure_ceiling,
            confounder_levels,
            selection_levels,
            format,
        } => {
            let (set, preset_ceiling) = commands::structure(&structure)?;
            let mut config = WorldConfig::new(set).levels(confounder_levels, selection_levels);
            if let Some(c) = rare_ceiling.or(preset_ceiling) {
                config = config.rare_outcome(c);
            }
            if let Some(c) = rare_exposure_ceiling {
                config = config.rare_exposure(c);
            }
            commands::verify(&config, seed, worlds, format, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let mut err = io::stderr();
    let result = run(cli, &mut out, &mut err).and_then(|()| Ok(out.flush()?));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            let _ = writeln!(err, "error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
