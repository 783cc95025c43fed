use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairtrs::data::{generate_unfair2d, DataError, Unfair2dParams};
use fairtrs::experiment::{
    parse_config, resolve_output_dir, run_bench, run_sweep, timing_csv, SweepConfig, SweepError,
    OUT_DIR_ENV,
};
use fairtrs::fairness::{fairness_report, fairness_report_strict};

#[derive(Parser)]
#[command(
    name = "fairtrs",
    version,
    about = "Robust training sweeps with fairness audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every (solver, radius) cell and write fairness, accuracy and timing tables.
    Sweep(RunArgs),
    /// Time training epochs per solver and radius on a single thread.
    Bench(RunArgs),
    /// Fairness gaps of precomputed predictions.
    Audit {
        /// CSV with a header row containing the prediction, label and sensitive columns.
        preds: PathBuf,
        #[arg(long, default_value = "pred")]
        pred_col: String,
        #[arg(long, default_value = "label")]
        label_col: String,
        #[arg(long, default_value = "sensitive")]
        sensitive_col: String,
        /// Fail when a gap is undefined instead of reporting NA.
        #[arg(long)]
        strict: bool,
        /// Print JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Write a synthetic two-group dataset as CSV.
    GenSynth { params: PathBuf, out: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory (overrides the environment and the config file).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Sweep(e) => e.exit_code() as u8,
            _ => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_config(args: &RunArgs) -> Result<SweepConfig, CliError> {
    let mut cfg = parse_config(&read(&args.config)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.config.display())))?;
    let env = std::env::var(OUT_DIR_ENV).ok();
    cfg.output_dir = resolve_output_dir(args.out_dir.as_deref(), env.as_deref(), &cfg.output_dir);
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(lr) = args.learning_rate {
        cfg.train.learning_rate = lr;
    }
    if let Some(threads) = args.threads {
        cfg.train.threads = threads;
    }
    Ok(cfg.validate()?)
}

fn sweep(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let report = run_sweep(&cfg)?;
    eprintln!(
        "{} rows written to {}",
        report.rows.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn bench(args: &RunArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let table = run_bench(&cfg)?;
    let csv = timing_csv(&table);
    std::fs::create_dir_all(&cfg.output_dir)
        .and_then(|()| std::fs::write(cfg.output_dir.join("timing.csv"), &csv))
        .map_err(|e| CliError::Input(format!("{}: {e}", cfg.output_dir.display())))?;
    print!("{csv}");
    Ok(())
}

fn audit(path: &Path, cols: [&str; 3], strict: bool, json: bool) -> Result<(), CliError> {
    let input = |m: String| CliError::Input(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| input(e.to_string()))?;
    let headers = reader.headers().map_err(|e| input(e.to_string()))?.clone();
    let idx = cols
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| input(format!("column `{c}` not found")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut columns: [Vec<u8>; 3] = Default::default();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| input(e.to_string()))?;
        for (k, &i) in idx.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("").trim();
            let v = match cell {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(input(format!(
                        "row {}: column `{}` must be 0 or 1, got `{other}`",
                        row + 2,
                        cols[k]
                    )))
                }
            };
            columns[k].push(v);
        }
    }
    let [p, y, s] = &columns;
    let report = if strict {
        fairness_report_strict(p, y, s)
    } else {
        fairness_report(p, y, s)
    }
    .map_err(|e| input(e.to_string()))?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn gen_synth(params: &Path, out: &Path) -> Result<(), CliError> {
    let p: Unfair2dParams = serde_json::from_str(&read(params)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", params.display())))?;
    let data = generate_unfair2d(&p)?;
    let file = std::fs::File::create(out)
        .map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
    data.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Bench(args) => bench(args),
        Command::Audit {
            preds,
            pred_col,
            label_col,
            sensitive_col,
            strict,
            json,
        } => audit(preds, [pred_col, label_col, sensitive_col], *strict, *json),
        Command::GenSynth { params, out } => gen_synth(params, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
