use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use foldrm::{
    fold_rm, format_csv, format_table, justify, parse_csv_with_schema, predict, run_cv, trace,
    CvConfig, Dataset, Error, LabelColumn, Meta, NumericSpec, Program, Protocol, Result,
    TrainConfig,
};

const ORDER_NOTE: &str = "% Rules are ordered: a rule applies only if no earlier rule does.\n";

#[derive(Parser)]
#[command(name = "foldrm", version, about = "Default rules with exceptions for tabular classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a model and write `<out>.asp` and `<out>.meta.json`.
    Train(TrainArgs),
    /// Predict a label for every row of a CSV.
    Predict(ModelArgs),
    /// Print the proof tree and rule trace for one row.
    Explain {
        #[command(flatten)]
        model: ModelArgs,
        /// Zero-based data row.
        #[arg(long)]
        row: usize,
    },
    /// Cross-validate on a dataset and report metrics.
    Eval(EvalArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label column, by name or zero-based index.
    #[arg(long)]
    label: String,
    /// `auto`, or a comma-separated list of numerical columns.
    #[arg(long, default_value = "auto")]
    numeric: String,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output path prefix.
    #[arg(long)]
    out: PathBuf,
    /// Also write the mutually exclusive form to `<out>.flat.asp`.
    #[arg(long)]
    flatten: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// Model prefix or `.asp` path; the sidecar is found next to it.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 42, env = "FOLDRM_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long)]
    stratified: bool,
    /// Train on two thirds and test on the rest instead of k folds.
    #[arg(long, conflicts_with = "stratified")]
    holdout: bool,
    /// Also write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_data(args: &DataArgs) -> Result<Dataset> {
    let numeric = match args.numeric.trim() {
        "auto" => NumericSpec::Auto,
        list => NumericSpec::Columns(
            list.split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect(),
        ),
    };
    let file = File::open(&args.data)?;
    Dataset::parse_csv(file, &LabelColumn::Name(args.label.clone()), &numeric)
}

fn load_model(path: &Path) -> Result<Program> {
    let prefix = match path.extension() {
        Some(ext) if ext == "asp" => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let meta = Meta::from_json(&fs::read_to_string(with_suffix(&prefix, ".meta.json"))?)?;
    Program::parse(&fs::read_to_string(with_suffix(&prefix, ".asp"))?, &meta)
}

fn train(args: &TrainArgs, out: &mut impl Write) -> Result<()> {
    let cfg = TrainConfig::new(args.data.ratio)?;
    let data = load_data(&args.data)?;
    let start = Instant::now();
    let model = fold_rm(&data, &cfg);
    let program = Program::from_model(
        &model.rules,
        data.schema().to_vec(),
        data.label_name(),
        data.label_values(),
        cfg.ratio,
    );
    let ms = start.elapsed().as_secs_f64() * 1000.0;
    fs::write(with_suffix(&args.out, ".asp"), format!("{ORDER_NOTE}{}", program.emit()))?;
    fs::write(with_suffix(&args.out, ".meta.json"), program.meta().to_json()?)?;
    if args.flatten {
        fs::write(with_suffix(&args.out, ".flat.asp"), program.flatten().emit())?;
    }
    writeln!(out, "learned {} rules in {ms:.1} ms", program.rules.len())?;
    Ok(())
}

fn cmd_predict(args: &ModelArgs, out: &mut impl Write) -> Result<()> {
    let program = load_model(&args.model)?;
    let table = parse_csv_with_schema(File::open(&args.data)?, &program.schema, &program.target)?;
    if table.rows.is_empty() {
        return Ok(());
    }
    let mut w = csv_line(out);
    w(&["row", program.target.as_str()])?;
    for (i, row) in table.rows.iter().enumerate() {
        let label = predict(&program, row)?.label.unwrap_or_default();
        w(&[i.to_string().as_str(), label.as_str()])?;
    }
    Ok(())
}

fn csv_line(out: &mut impl Write) -> impl FnMut(&[&str]) -> Result<()> + '_ {
    move |fields| {
        let quoted: Vec<String> = fields
            .iter()
            .map(|f| {
                if f.contains([',', '"', '\n', '\r']) {
                    format!("\"{}\"", f.replace('"', "\"\""))
                } else {
                    f.to_string()
                }
            })
            .collect();
        writeln!(out, "{}", quoted.join(","))?;
        Ok(())
    }
}

fn explain(args: &ModelArgs, row: usize, out: &mut impl Write) -> Result<()> {
    let program = load_model(&args.model)?;
    let table = parse_csv_with_schema(File::open(&args.data)?, &program.schema, &program.target)?;
    let Some(values) = table.rows.get(row) else {
        return Err(Error::Config(format!(
            "row {row} out of range, data has {} rows",
            table.rows.len()
        )));
    };
    write!(out, "{}", justify(&program, values, row)?.render())?;
    writeln!(out)?;
    write!(out, "{}", trace(&program, values)?)?;
    Ok(())
}

fn eval(args: &EvalArgs, out: &mut impl Write) -> Result<()> {
    let cfg = CvConfig {
        train: TrainConfig::new(args.data.ratio)?,
        folds: args.folds,
        seed: args.seed,
        repeats: args.repeats,
        stratified: args.stratified,
        protocol: if args.holdout { Protocol::Holdout } else { Protocol::KFold },
    };
    let data = load_data(&args.data)?;
    let report = run_cv(&data, &cfg)?;
    let name = args
        .data
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let rows = [(name, report.mean)];
    write!(out, "{}", format_table(&rows))?;
    if let Some(path) = &args.out {
        fs::write(path, format_csv(&rows))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Train(a) => train(a, &mut out),
        Command::Predict(a) => cmd_predict(a, &mut out),
        Command::Explain { model, row } => explain(model, *row, &mut out),
        Command::Eval(a) => eval(a, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
