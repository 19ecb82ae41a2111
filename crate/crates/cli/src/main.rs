use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use povml::pipeline::{self, ModelFile, PipelineConfig};
use povml::schema::{load_csv_with, profile, LoadOptions, Schema, YesNoPolicy};
use povml::synth::{write_survey, SurveyCounts};
use povml::wrangle::apply_plan;
use povml::Error;

/// Poverty-level classification pipeline for household survey data.
#[derive(Parser)]
#[command(name = "povml", version)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "POVML_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Row/column counts, missing cells per column and class balance.
    Profile {
        dataset: PathBuf,
        /// Fail (exit 4) unless the file matches the published survey counts.
        #[arg(long)]
        expect_canonical: bool,
        #[arg(long, value_enum, default_value_t = YesNo::YesMissing)]
        yes_no: YesNo,
        /// Write the profile here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the wrangle plan to the whole dataset and write the feature table.
    Wrangle {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Also write the applied plan as JSON.
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
    /// Fit the pipeline on the training split and save it.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Train, score the held-out split and optionally cross-validate.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Receives report.json, report.csv, audit.log and, when applicable,
        /// explained_variance.csv and importance.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Stratified k-fold cross-validation over all wrangled rows.
    Cv {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Ranked feature importance of a tree-based model.
    Importance {
        /// Saved model; when absent the model is trained from the config.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic survey file with the published layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Row count; counts are scaled from the published file.
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON pipeline config; defaults apply to omitted fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cross-validation folds (0 disables).
    #[arg(long)]
    cv: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum YesNo {
    YesMissing,
    YesOne,
}

impl From<YesNo> for YesNoPolicy {
    fn from(v: YesNo) -> Self {
        match v {
            YesNo::YesMissing => YesNoPolicy::YesMissing,
            YesNo::YesOne => YesNoPolicy::YesOne,
        }
    }
}

enum Failure {
    Core(Error),
    Write(PathBuf, std::io::Error),
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(Error::Stage { .. }) => 3,
            Failure::Core(_) => 2,
            Failure::Write(..) => 2,
            Failure::Assertion(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Write(p, e) => write!(f, "cannot write {}: {e}", p.display()),
            Failure::Assertion(m) => write!(f, "assertion failed: {m}"),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Write(dir.to_path_buf(), e))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::Write(path.to_path_buf(), e))
}

fn write_lines(path: &Path, lines: &[String]) -> CliResult {
    let mut text = lines.join("\n");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Write(dir.to_path_buf(), e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Write(path.to_path_buf(), e))
}

fn load_config(run: &RunArgs) -> CliResult<PipelineConfig> {
    let mut config = match &run.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            PipelineConfig::from_json(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(d) = &run.dataset {
        config.dataset = Some(d.clone());
    }
    if let Some(s) = run.seed {
        config.seed = s;
    }
    if let Some(k) = run.cv {
        config.eval.cv_folds = k;
    }
    config.validate()?;
    Ok(config)
}

fn json<T: serde::Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    v.push(b'\n');
    Ok(v)
}

fn cmd_profile(dataset: &Path, expect_canonical: bool, yes_no: YesNo, out: Option<&Path>) -> CliResult {
    let schema = Schema::survey();
    let table = load_csv_with(dataset, &schema, LoadOptions { yes_no: yes_no.into() })?;
    let p = profile(&table);
    let body = json(&p)?;
    match out {
        Some(path) => write_file(path, &body)?,
        None => std::io::stdout()
            .write_all(&body)
            .map_err(|e| Failure::Write("<stdout>".into(), e))?,
    }
    if expect_canonical {
        let mut problems = Vec::new();
        if p.n_rows != 9557 || p.n_cols != 143 {
            problems.push(format!("shape {}x{} (expected 9557x143)", p.n_rows, p.n_cols));
        }
        for (col, expected, observed) in p.missing_mismatches(&schema) {
            problems.push(format!("{col}: {observed} missing (expected {expected})"));
        }
        if !problems.is_empty() {
            return Err(Failure::Assertion(problems.join("; ")));
        }
    }
    Ok(())
}

fn cmd_wrangle(run: &RunArgs, out: &Path, audit: Option<&Path>, plan_out: Option<&Path>) -> CliResult {
    let config = load_config(run)?;
    let table = pipeline::load_dataset(&config)?;
    let plan = pipeline::load_plan(&config)?;
    let w = apply_plan(&table, &plan).map_err(|e| e.in_stage(povml::Stage::Wrangle))?;
    w.matrix.write_csv(create(out)?)?;
    if let Some(a) = audit {
        let mut lines = vec![
            format!("config_hash {}", config.hash()),
            format!("ingest: rows {} columns {}", table.n_rows(), table.n_cols()),
        ];
        lines.extend(w.audit.to_log_lines());
        write_lines(a, &lines)?;
    }
    if let Some(p) = plan_out {
        write_file(p, plan.to_json()?.as_bytes())?;
    }
    Ok(())
}

fn cmd_train(run: &RunArgs, model_out: &Path, audit: Option<&Path>) -> CliResult {
    let config = load_config(run)?;
    let table = pipeline::load_dataset(&config)?;
    let trained = pipeline::train(&config, &table)?;
    let file = ModelFile::new(&config, trained.fit.pipeline);
    write_file(model_out, file.to_json()?.as_bytes())?;
    if let Some(a) = audit {
        write_lines(a, &trained.audit)?;
    }
    Ok(())
}

fn cmd_evaluate(run: &RunArgs, out_dir: &Path) -> CliResult {
    let config = load_config(run)?;
    let table = pipeline::load_dataset(&config)?;
    let result = pipeline::evaluate(&config, &table)?;
    write_file(&out_dir.join("report.json"), &json(&result.report)?)?;
    result.report.write_csv(create(&out_dir.join("report.csv"))?)?;
    if let Some(pca) = &result.train.fit.pipeline.pca {
        let path = out_dir.join("explained_variance.csv");
        let mut w = create(&path)?;
        pca.write_variance_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Failure::Write(path, e))?;
    }
    if let Some(imp) = &result.report.importance {
        imp.write_csv(create(&out_dir.join("importance.csv"))?)?;
    }
    write_lines(&out_dir.join("audit.log"), &result.train.audit)?;
    Ok(())
}

fn cmd_cv(run: &RunArgs, out: &Path, audit: Option<&Path>) -> CliResult {
    let config = load_config(run)?;
    let k = if config.eval.cv_folds >= 2 {
        config.eval.cv_folds
    } else {
        5
    };
    let table = pipeline::load_dataset(&config)?;
    let (report, lines) = pipeline::cross_validate_table(&config, &table, k)?;
    write_file(out, &json(&report)?)?;
    if let Some(a) = audit {
        write_lines(a, &lines)?;
    }
    Ok(())
}

fn cmd_importance(model: Option<&Path>, run: &RunArgs, out: &Path) -> CliResult {
    let fitted = match model {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            ModelFile::from_json(&text)?.pipeline
        }
        None => {
            let config = load_config(run)?;
            let table = pipeline::load_dataset(&config)?;
            pipeline::train(&config, &table)?.fit.pipeline
        }
    };
    let report = fitted.importance()?;
    if report.no_splits {
        eprintln!("warning: the model made no splits; importance is empty");
    }
    report.write_csv(create(out)?)?;
    Ok(())
}

fn cmd_synth(out: &Path, rows: Option<usize>, seed: u64) -> CliResult {
    let counts = rows.map_or_else(SurveyCounts::default, SurveyCounts::scaled);
    let mut w = create(out)?;
    write_survey(&mut w, &counts, seed)?;
    w.flush().map_err(|e| Failure::Write(out.to_path_buf(), e))
}

fn run(cli: Cli) -> CliResult {
    match &cli.command {
        Command::Profile {
            dataset,
            expect_canonical,
            yes_no,
            out,
        } => cmd_profile(dataset, *expect_canonical, *yes_no, out.as_deref()),
        Command::Wrangle {
            run,
            out,
            audit,
            plan_out,
        } => cmd_wrangle(run, out, audit.as_deref(), plan_out.as_deref()),
        Command::Train { run, model_out, audit } => cmd_train(run, model_out, audit.as_deref()),
        Command::Evaluate { run, out_dir } => cmd_evaluate(run, out_dir),
        Command::Cv { run, out, audit } => cmd_cv(run, out, audit.as_deref()),
        Command::Importance { model, run, out } => cmd_importance(model.as_deref(), run, out),
        Command::Synth { out, rows, seed } => cmd_synth(out, *rows, *seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("povml: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("povml: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
