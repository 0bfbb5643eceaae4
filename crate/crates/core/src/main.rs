use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use piwno::harness::{read_metrics, train_run, write_report, Checkpoint, ReportOptions, TrainConfig};
use piwno::physics::{Mode, ProblemId, ProblemSpec};
use piwno::problems::{generate_splits, Dataset, Dtype};
use piwno::{Error, Result};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "piwno", version, about = "Physics-informed wavelet neural operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test datasets.
    Gen(GenArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Write error tables, metrics and heatmaps.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    problem: ProblemId,
    /// Training samples; validation and test sets get n/8 each.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "data")]
    out: PathBuf,
    /// Omit solutions from the training set.
    #[arg(long)]
    no_solutions: bool,
    #[arg(long, default_value = "f64", value_parser = parse_dtype)]
    dtype: Dtype,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemId>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory holding train.pwno and val.pwno.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any configuration key as section.key=value; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint path, or a name resolved as <out>/<name>.pwck.
    #[arg(long)]
    ckpt: String,
    /// Dataset path, or a name resolved as <dir>/<name>.pwno.
    #[arg(long)]
    data: String,
    /// Run directory for checkpoint names.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Dataset directory for dataset names.
    #[arg(long, default_value = "data")]
    dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    ckpt: String,
    #[arg(long)]
    data: String,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "data")]
    dir: PathBuf,
    /// Where report files go (default: <out>/report).
    #[arg(long)]
    report_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    samples: Vec<usize>,
    #[arg(long)]
    frame: Option<usize>,
}

fn parse_dtype(s: &str) -> std::result::Result<Dtype, String> {
    match s {
        "f32" => Ok(Dtype::F32),
        "f64" => Ok(Dtype::F64),
        _ => Err(format!("unknown dtype `{s}` (f32 | f64)")),
    }
}

fn resolve(name: &str, ext: &str, base: &Path) -> PathBuf {
    let direct = PathBuf::from(name);
    if direct.exists() {
        return direct;
    }
    let with_ext = PathBuf::from(format!("{name}.{ext}"));
    if with_ext.exists() {
        return with_ext;
    }
    base.join(format!("{name}.{ext}"))
}

fn gen(a: GenArgs) -> Result<()> {
    let spec = ProblemSpec::new(a.problem);
    let splits = generate_splits(&spec, a.n, a.seed, !a.no_solutions)?;
    for (name, ds) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        let path = a.out.join(format!("{name}.pwno"));
        ds.save(&path, a.dtype)?;
        println!("wrote {} ({} samples{})", path.display(), ds.count, if ds.has_solutions() { "" } else { ", no solutions" });
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut cfg = match (&a.config, a.problem) {
        (Some(path), _) => TrainConfig::load(path)?,
        (None, Some(p)) => TrainConfig::new(p),
        (None, None) => return Err(Error::Config("train needs --config or --problem".into())),
    };
    if let (Some(p), Some(_)) = (a.problem, &a.config) {
        cfg.set("run", "problem", p.as_str())?;
    }
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(s) = a.seed {
        cfg.model_seed = s;
    }
    if let Some(d) = &a.data {
        cfg.train_data = Some(d.join("train.pwno"));
        cfg.val_data = Some(d.join("val.pwno"));
    }
    if let Some(o) = a.out {
        cfg.out_dir = o;
    }
    for s in &a.set {
        cfg.apply_override(s)?;
    }
    cfg.validate()?;
    let out = train_run(&cfg)?;
    let best = out.best.metrics.as_ref();
    println!(
        "trained {} epochs; best epoch {} (val rel MSE {}); outputs in {}",
        out.metrics.len(),
        out.best_epoch,
        best.map(|m| format!("{:.4} %", 100.0 * m.rel_mse_val_mean)).unwrap_or_else(|| "n/a".into()),
        cfg.out_dir.display()
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&resolve(&a.ckpt, "pwck", &a.out))?;
    let data = Dataset::load(&resolve(&a.data, "pwno", &a.dir))?;
    let r = piwno::harness::evaluate(&ck.model, &ck.spec, &data)?;
    println!("{} relative MSE over {} samples: {}", ck.spec.id, data.count - r.excluded, r.summary());
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let ck = Checkpoint::load(&resolve(&a.ckpt, "pwck", &a.out))?;
    let data = Dataset::load(&resolve(&a.data, "pwno", &a.dir))?;
    let metrics_path = a.out.join("metrics.csv");
    let metrics = metrics_path.exists().then(|| read_metrics(&metrics_path)).transpose()?;
    let mut opts = ReportOptions::new(a.report_dir.unwrap_or_else(|| a.out.join("report")));
    opts.samples = a.samples;
    opts.frame = a.frame;
    let r = write_report(&ck, &data, metrics.as_deref(), &opts)?;
    println!("{}: {} written to {}", ck.spec.id, r.summary(), opts.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = std::env::var("PIWNO_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Report(a) => report_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
