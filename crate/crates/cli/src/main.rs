use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rumorlab_core::harness::report::{read_checkpoint, read_csv, summary_table};
use rumorlab_core::harness::{
    feature_importance_report, generate_synthetic, run_experiment, split_and_controllables, train_detector,
    DatasetSource, DatasetSummary, ExperimentConfig, HarnessError, Method, ResultRow, SyntheticSpec,
};
use rumorlab_core::{BaselineMode, CreditMode};

#[derive(Parser)]
#[command(name = "rumorlab", version, about = "Evasion attacks on a graph rumor detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train a detector on a dataset split and report test metrics.
    TrainDetector(TrainArgs),
    /// Run attackers and write result files.
    Attack(AttackArgs),
    /// Summarize a results CSV across seeds.
    Report(ReportArgs),
    /// Rank features by learned policy weight.
    FeatureImportance(ImportanceArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "weibo-mini")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplies the preset's node, edge and component counts.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long)]
    components: Option<usize>,
    #[arg(long, default_value_t = 0.7)]
    split_ratio: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset file; a synthetic preset is generated when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "weibo-mini")]
    preset: String,
    /// Seed of the synthetic generator.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
}

impl DataArgs {
    fn source(&self) -> Result<DatasetSource, HarnessError> {
        match &self.data {
            Some(p) => Ok(DatasetSource::File { path: p.clone() }),
            None => SyntheticSpec::preset(&self.preset, self.data_seed)
                .map(DatasetSource::Synthetic)
                .ok_or_else(|| HarnessError::Config(format!("unknown preset `{}`", self.preset))),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    data: DataArgs,
    /// JSON experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated, e.g. hier-linucb,hier-linucb-step,dcg,random.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long = "horizon", short = 'T')]
    horizon: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    last_k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_baseline)]
    baseline: Option<BaselineMode>,
    #[arg(long, value_parser = parse_credit)]
    credit: Option<CreditMode>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    action_cap: Option<usize>,
    #[arg(long)]
    rule_reps: Option<usize>,
    #[arg(long)]
    detector_epochs: Option<usize>,
    #[arg(long)]
    no_traces: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// A results.csv file or the directory holding it.
    path: PathBuf,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    subgraph: PathBuf,
    #[arg(long)]
    node: PathBuf,
    #[arg(long, default_value_t = 8)]
    top: usize,
    /// Also list every slot with its weight.
    #[arg(long)]
    all: bool,
}

fn parse_baseline(s: &str) -> Result<BaselineMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("expected time, constant, graph-bucket, state-function or none, got `{s}`"))
}

fn parse_credit(s: &str) -> Result<CreditMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected step-wise or delayed, got `{s}`"))
}

fn gen(a: GenArgs) -> Result<(), HarnessError> {
    let base = SyntheticSpec::preset(&a.preset, a.seed).ok_or_else(|| HarnessError::Config(format!("unknown preset `{}`", a.preset)))?;
    let mut spec = base.scaled(a.scale)?;
    spec.nodes = a.nodes.unwrap_or(spec.nodes);
    spec.edges = a.edges.unwrap_or(spec.edges);
    spec.components = a.components.unwrap_or(spec.components);
    let mut d = generate_synthetic(&spec)?;
    d.split = Some(split_and_controllables(&d, a.split_ratio, 1.0, a.seed)?.split);
    d.save(&a.out)?;
    print!("{}", DatasetSummary::of(&d.graph()?));
    println!("wrote {}", a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig {
        dataset: a.data.source()?,
        ..Default::default()
    };
    if let Some(e) = a.epochs {
        cfg.detector.epochs = e;
    }
    cfg.validate()?;
    let (spec, g) = cfg.load_data()?;
    print!("{}", DatasetSummary::of(&g));
    let (det, row, _) = train_detector(&spec, &g, &cfg, a.seed)?;
    println!(
        "loss {:.4}  test accuracy {:.3}  recall {:.3}  NDCG {:.3}  targets {}",
        row.final_loss, row.test_accuracy, row.test_recall, row.test_ndcg, row.targets
    );
    if let Some(out) = a.out {
        det.save(&out).map_err(|e| HarnessError::Config(format!("{}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn attack(a: AttackArgs) -> Result<(), HarnessError> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig {
            dataset: a.data.source()?,
            ..Default::default()
        },
    };
    if a.data.data.is_some() {
        cfg.dataset = a.data.source()?;
    }
    macro_rules! set {
        ($($field:ident = $v:expr),*) => { $( if let Some(v) = $v { cfg.$field = v; } )* };
    }
    set!(
        methods = a.methods,
        seeds = a.seeds,
        horizon = a.horizon,
        episodes = a.episodes,
        last_k = a.last_k,
        alpha = a.alpha,
        baseline = a.baseline,
        credit = a.credit,
        controllable_fraction = a.fraction
    );
    cfg.cutoff = a.cutoff.or(cfg.cutoff);
    cfg.rule_repetitions = a.rule_reps.or(cfg.rule_repetitions);
    if let Some(c) = a.action_cap {
        cfg.action_cap = c;
    }
    if let Some(e) = a.detector_epochs {
        cfg.detector.epochs = e;
    }
    cfg.write_traces &= !a.no_traces;
    std::fs::create_dir_all(&a.out).map_err(|e| HarnessError::Config(format!("{}: {e}", a.out.display())))?;
    let s = run_experiment(&cfg, &a.out)?;
    print!("{}", summary_table(&s.results));
    println!("wrote {}", a.out.display());
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), HarnessError> {
    let path = if a.path.is_dir() { a.path.join("results.csv") } else { a.path };
    let rows: Vec<ResultRow> = read_csv(Path::new(&path))?;
    print!("{}", summary_table(&rows));
    Ok(())
}

fn importance(a: ImportanceArgs) -> Result<(), HarnessError> {
    let r = feature_importance_report(&read_checkpoint(&a.subgraph)?, &read_checkpoint(&a.node)?)?;
    print!("{}", r.top_text(a.top));
    if a.all {
        print!("{}", r.full_text());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::TrainDetector(a) => train(a),
        Command::Attack(a) => attack(a),
        Command::Report(a) => report(a),
        Command::FeatureImportance(a) => importance(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
