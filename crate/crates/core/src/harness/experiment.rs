//! Multi-seed experiment runs and their output files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{load_dataset, DatasetSpec};
use super::report::{write_csv, CurveRow, DetectorRow, DiagnosticRow, ResultRow, TdropRow};
use super::rng::{derived_seed, stream};
use super::split::split_and_controllables;
use super::synth::{generate_synthetic, SyntheticSpec};
use super::HarnessError;
use crate::attackers::{run_rule_episode, RuleKind, RuleStrategy, Variant};
use crate::bandit::{
    inv_beta_ml, predictive_variance, variance_check, Baseline, BaselineMode, CreditMode, RewardShaper, ShaperBounds,
};
use crate::detector::{Detector, TrainConfig};
use crate::environment::{run_episode, Agent, AttackEnv, AttackSetup, EnvConfig};
use crate::features::{schema_document, schema_hash, RoleConfig};
use crate::graph::{AttackEdgeMode, HeteroGraph, InfluenceTable, NodeId, PageRankConfig};
use crate::objective::{default_cutoff, IndicatorMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    File { path: PathBuf },
}

/// Reward-design variants of the learned attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Constant baseline: the mean of every past reward.
    Step,
    /// Every step is rewarded with the shaped episode total.
    Delay,
    /// Baseline keyed by attack edges already inside the selection.
    Graph,
    /// Linear state-value baseline.
    Function,
    /// No baseline.
    NoBaseline,
}

impl Ablation {
    const ALL: [Ablation; 5] = [
        Ablation::Step,
        Ablation::Delay,
        Ablation::Graph,
        Ablation::Function,
        Ablation::NoBaseline,
    ];

    fn suffix(self) -> &'static str {
        match self {
            Ablation::Step => "step",
            Ablation::Delay => "delay",
            Ablation::Graph => "graph",
            Ablation::Function => "function",
            Ablation::NoBaseline => "no-baseline",
        }
    }

    pub fn modes(self) -> (BaselineMode, CreditMode) {
        match self {
            Ablation::Step => (BaselineMode::Constant, CreditMode::StepWise),
            Ablation::Delay => (BaselineMode::Time, CreditMode::Delayed),
            Ablation::Graph => (BaselineMode::GraphBucket, CreditMode::StepWise),
            Ablation::Function => (BaselineMode::StateFunction, CreditMode::StepWise),
            Ablation::NoBaseline => (BaselineMode::None, CreditMode::StepWise),
        }
    }
}

pub const LEARNED_LABEL: &str = "hier-linucb";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    /// The hierarchical LinUCB attacker with the configured reward design.
    Learned,
    Ablation(Ablation),
    Rule(RuleKind),
}

impl Method {
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Learned => f.write_str(LEARNED_LABEL),
            Method::Ablation(a) => write!(f, "{LEARNED_LABEL}-{}", a.suffix()),
            Method::Rule(k) => f.write_str(k.name()),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == LEARNED_LABEL {
            return Ok(Method::Learned);
        }
        if let Some(a) = Ablation::ALL.iter().find(|a| s == format!("{LEARNED_LABEL}-{}", a.suffix())) {
            return Ok(Method::Ablation(*a));
        }
        if let Some(k) = RuleKind::ALL.iter().find(|k| k.name() == s) {
            return Ok(Method::Rule(*k));
        }
        Err(format!("unknown method `{s}`"))
    }
}

impl TryFrom<String> for Method {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub alpha: f64,
    pub episodes: usize,
    /// Learned methods report the mean over this many final episodes.
    pub last_k: usize,
    pub methods: Vec<Method>,
    /// Reward design of the plain learned method.
    pub baseline: BaselineMode,
    pub credit: CreditMode,
    pub baseline_decay: Option<f64>,
    pub split_ratio: f64,
    pub controllable_fraction: f64,
    pub cutoff: Option<usize>,
    pub action_cap: usize,
    /// Episodes per rule variant; `min(episodes, 30)` when absent.
    pub rule_repetitions: Option<usize>,
    /// Dcg-rule episodes used to fit the reward normalization.
    pub calibration_episodes: usize,
    pub calibration_widen: f64,
    pub detector: TrainConfig,
    pub edge_mode: AttackEdgeMode,
    pub indicator: IndicatorMode,
    pub roles: RoleConfig,
    pub write_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(SyntheticSpec::weibo_mini(0)),
            seeds: vec![0, 1, 2, 3, 4],
            horizon: 20,
            alpha: 1.0,
            episodes: 1000,
            last_k: 100,
            methods: vec![
                Method::Learned,
                Method::Rule(RuleKind::Random),
                Method::Rule(RuleKind::RandomPlus),
                Method::Rule(RuleKind::Degree),
                Method::Rule(RuleKind::Influence),
                Method::Rule(RuleKind::Dcg),
            ],
            baseline: BaselineMode::Time,
            credit: CreditMode::StepWise,
            baseline_decay: None,
            split_ratio: 0.7,
            controllable_fraction: 0.2,
            cutoff: None,
            action_cap: 5000,
            rule_repetitions: None,
            calibration_episodes: 30,
            calibration_widen: 0.1,
            detector: TrainConfig::default(),
            edge_mode: AttackEdgeMode::Single,
            indicator: IndicatorMode::WithinCutoff,
            roles: RoleConfig::default(),
            write_traces: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.episodes == 0 || self.last_k == 0 {
            return bad("episodes and last_k must be positive".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be finite and non-negative, got {}", self.alpha));
        }
        if let Some(d) = self.baseline_decay {
            if !(d > 0.0 && d <= 1.0) {
                return bad(format!("baseline decay {d} is outside (0, 1]"));
            }
        }
        if self.calibration_episodes == 0 {
            return bad("calibration needs at least one episode".into());
        }
        if !(self.calibration_widen >= 0.0) {
            return bad("calibration widening must be non-negative".into());
        }
        if self.action_cap == 0 || self.cutoff == Some(0) || self.rule_repetitions == Some(0) {
            return bad("action cap, cutoff and rule repetitions must be positive".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split ratio {} is outside (0, 1)", self.split_ratio));
        }
        if !(self.controllable_fraction > 0.0 && self.controllable_fraction <= 1.0) {
            return bad(format!("controllable fraction {} is outside (0, 1]", self.controllable_fraction));
        }
        self.detector.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    fn env_config(&self) -> EnvConfig {
        EnvConfig {
            horizon: self.horizon,
            cutoff: self.cutoff,
            indicator: self.indicator,
            action_cap: self.action_cap,
            edge_mode: self.edge_mode,
            roles: self.roles,
        }
    }

    fn rule_repetitions(&self) -> usize {
        self.rule_repetitions.unwrap_or(self.episodes.min(30))
    }

    fn modes(&self, m: Method) -> Option<(BaselineMode, CreditMode)> {
        match m {
            Method::Learned => Some((self.baseline, self.credit)),
            Method::Ablation(a) => Some(a.modes()),
            Method::Rule(_) => None,
        }
    }

    pub fn load_data(&self) -> Result<(DatasetSpec, HeteroGraph), HarnessError> {
        match &self.dataset {
            DatasetSource::Synthetic(s) => {
                let d = generate_synthetic(s)?;
                let g = d.graph()?;
                Ok((d, g))
            }
            DatasetSource::File { path } => load_dataset(path),
        }
    }
}

/// Everything a seed's methods share.
struct Prepared {
    seed: u64,
    setup: AttackSetup,
    detector: Arc<Detector>,
    step_bounds: ShaperBounds,
    delayed_bounds: ShaperBounds,
    detector_row: DetectorRow,
}

/// Trains a detector for `seed` on its own split.
pub fn train_detector(
    spec: &DatasetSpec,
    graph: &HeteroGraph,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(Detector, DetectorRow, AttackSetup), HarnessError> {
    let part = split_and_controllables(spec, cfg.split_ratio, cfg.controllable_fraction, seed)?;
    let tc = TrainConfig {
        seed: derived_seed(seed, "detector-init"),
        ..cfg.detector
    };
    let (det, hist) = Detector::train(graph, &part.train_labels(spec), &tc)?;
    let influence = InfluenceTable::compute(graph, &PageRankConfig::default());
    let ranked = graph.messages().count();
    let m = det.evaluate(graph, &part.test_labels(spec), &influence, cfg.cutoff.unwrap_or(default_cutoff(ranked)))?;
    let row = DetectorRow {
        seed,
        final_loss: hist.last().copied().unwrap_or(f64::NAN),
        test_accuracy: m.accuracy,
        test_recall: m.recall,
        test_ndcg: m.ndcg,
        targets: part.targets.len(),
        controllable: part.controllable.len(),
    };
    Ok((det, row, part.setup(spec, graph.clone())))
}

fn prepare(spec: &DatasetSpec, graph: &HeteroGraph, cfg: &ExperimentConfig, seed: u64) -> Result<Prepared, HarnessError> {
    let (det, detector_row, setup) = train_detector(spec, graph, cfg, seed)?;
    let detector = Arc::new(det);
    let mut env = AttackEnv::new(setup.clone(), detector.clone(), cfg.env_config())?;
    let mut rng = stream(seed, "calibration");
    let (mut steps, mut totals) = (Vec::new(), Vec::new());
    for i in 0..cfg.calibration_episodes {
        let variant = if i % 2 == 0 { Variant::GuR } else { Variant::BuN };
        let ep = run_rule_episode(&mut env, RuleStrategy { kind: RuleKind::Dcg, variant }, &mut rng)?;
        steps.extend_from_slice(&ep.deltas);
        totals.push(ep.total);
    }
    if steps.is_empty() {
        steps.push(0.0);
    }
    Ok(Prepared {
        seed,
        setup,
        detector,
        step_bounds: ShaperBounds::calibrate(&steps, cfg.calibration_widen)?,
        delayed_bounds: ShaperBounds::calibrate(&totals, cfg.calibration_widen)?,
        detector_row,
    })
}

#[derive(Debug, Clone, Serialize)]
struct TraceLine<'a, S: Serialize> {
    method: &'a str,
    seed: u64,
    episode: usize,
    j0: f64,
    jt: f64,
    total: f64,
    truncated: bool,
    steps: &'a [S],
}

#[derive(Debug, Clone, Serialize)]
struct RuleStep {
    t: usize,
    user: NodeId,
    message: NodeId,
    delta: f64,
}

#[derive(Default)]
struct MethodOutput {
    rows: Vec<ResultRow>,
    curves: Vec<CurveRow>,
    traces: Vec<String>,
    diagnostics: Vec<DiagnosticRow>,
    tdrop: Vec<TdropRow>,
    checkpoints: Vec<(String, String)>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn row(cfg: &ExperimentConfig, dataset: &str, method: String, seed: u64, d: f64, episodes: usize, notes: String) -> ResultRow {
    ResultRow {
        method,
        dataset: dataset.to_string(),
        t: cfg.horizon,
        seed,
        delta_ndcg: d,
        delta_ndcg_x100: 100.0 * d,
        episodes,
        notes,
    }
}

fn run_learned(cfg: &ExperimentConfig, dataset: &str, p: &Prepared, method: Method) -> Result<MethodOutput, HarnessError> {
    let label = method.label();
    let (bmode, credit) = cfg.modes(method).expect("learned method");
    let mut baseline = Baseline::new(bmode);
    if let Some(d) = cfg.baseline_decay {
        baseline = baseline.with_decay(d);
    }
    let shaper = RewardShaper::new(credit, baseline).with_bounds(p.step_bounds, p.delayed_bounds);
    let mut agent = Agent::new(cfg.alpha, shaper);
    let mut env = AttackEnv::new(p.setup.clone(), p.detector.clone(), cfg.env_config())?;
    let mut rng = stream(p.seed, &format!("exploration/{label}"));

    let mut out = MethodOutput::default();
    let mut totals = Vec::with_capacity(cfg.episodes);
    let mut raw_rows: Vec<Vec<f64>> = Vec::new();
    let mut adj_rows: Vec<Vec<f64>> = Vec::new();
    let mut samples: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut tdrops = Vec::with_capacity(cfg.episodes);
    for ep in 0..cfg.episodes {
        let trace = run_episode(&mut env, &mut agent, &mut rng)?;
        totals.push(trace.total);
        out.curves.push(CurveRow {
            method: label.clone(),
            seed: p.seed,
            episode: ep,
            delta_ndcg: trace.total,
        });
        if cfg.write_traces {
            out.traces.push(
                serde_json::to_string(&TraceLine {
                    method: &label,
                    seed: p.seed,
                    episode: ep,
                    j0: trace.j0,
                    jt: trace.jt,
                    total: trace.total,
                    truncated: trace.truncated,
                    steps: &trace.steps,
                })
                .expect("trace serializes"),
            );
        }
        tdrops.push((
            trace.steps.iter().map(|s| s.tdrop).sum::<usize>() as f64,
            trace.steps.iter().map(|s| s.rrise).sum::<usize>() as f64,
        ));
        if trace.steps.len() == cfg.horizon && cfg.horizon > 0 {
            raw_rows.push(trace.rewards());
            adj_rows.push(trace.adjusted());
        }
        samples.extend(trace.steps.into_iter().map(|s| (s.x_subgraph, s.adjusted)));
    }
    let k = cfg.last_k.min(cfg.episodes);
    let tail = &totals[totals.len() - k..];
    out.rows.push(row(
        cfg,
        dataset,
        label.clone(),
        p.seed,
        mean(tail),
        cfg.episodes,
        format!("mean of last {k} of {} episodes", cfg.episodes),
    ));
    let window = &tdrops[tdrops.len() - k..];
    out.tdrop.push(TdropRow {
        method: label.clone(),
        seed: p.seed,
        episodes: k,
        tdrop: mean(&window.iter().map(|x| x.0).collect::<Vec<_>>()),
        rrise: mean(&window.iter().map(|x| x.1).collect::<Vec<_>>()),
    });

    if !raw_rows.is_empty() {
        let vc = variance_check(&raw_rows)?;
        let adjusted_variance = {
            let all: Vec<f64> = adj_rows.iter().flatten().copied().collect();
            let m = mean(&all);
            all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / all.len() as f64
        };
        let residuals: Vec<f64> = samples.iter().map(|(x, r)| r - agent.subgraph.predict(x)).collect();
        let (inv_beta, eta) = match inv_beta_ml(&residuals) {
            Ok(ib) => {
                let e = mean(&samples.iter().map(|(x, _)| predictive_variance(ib, &agent.subgraph, x)).collect::<Vec<_>>());
                (ib, e)
            }
            Err(_) => (f64::NAN, f64::NAN),
        };
        out.diagnostics.push(DiagnosticRow {
            method: label.clone(),
            seed: p.seed,
            episodes: raw_rows.len(),
            sigma2: vc.sigma2,
            sigma2_prime: vc.sigma2_prime,
            reduced: vc.pass,
            adjusted_variance,
            inv_beta,
            mean_predictive_variance: eta,
        });
    }
    let hash = schema_hash();
    for (level, policy) in [("subgraph", &agent.subgraph), ("node", &agent.node)] {
        out.checkpoints.push((
            format!("{label}-seed{}-{level}.json", p.seed),
            serde_json::to_string_pretty(&policy.to_checkpoint(level, &hash)).expect("checkpoint serializes"),
        ));
    }
    Ok(out)
}

fn run_rule(cfg: &ExperimentConfig, dataset: &str, p: &Prepared, kind: RuleKind) -> Result<MethodOutput, HarnessError> {
    let reps = cfg.rule_repetitions();
    let variants: &[Variant] = if kind.has_variants() {
        &[Variant::GuR, Variant::BuN]
    } else {
        &[Variant::GuR]
    };
    let mut env = AttackEnv::new(p.setup.clone(), p.detector.clone(), cfg.env_config())?;
    let mut out = MethodOutput::default();
    let mut means = Vec::new();
    for &variant in variants {
        let strategy = RuleStrategy { kind, variant };
        let label = strategy.to_string();
        let mut rng = stream(p.seed, &format!("rule/{label}"));
        let mut totals = Vec::with_capacity(reps);
        for ep in 0..reps {
            let e = run_rule_episode(&mut env, strategy, &mut rng)?;
            out.curves.push(CurveRow {
                method: label.clone(),
                seed: p.seed,
                episode: ep,
                delta_ndcg: e.total,
            });
            if cfg.write_traces {
                let steps: Vec<RuleStep> = e
                    .edges
                    .iter()
                    .zip(&e.deltas)
                    .enumerate()
                    .map(|(i, (&(user, message), &delta))| RuleStep {
                        t: i + 1,
                        user,
                        message,
                        delta,
                    })
                    .collect();
                out.traces.push(
                    serde_json::to_string(&TraceLine {
                        method: &label,
                        seed: p.seed,
                        episode: ep,
                        j0: e.j0,
                        jt: e.jt,
                        total: e.total,
                        truncated: e.truncated,
                        steps: &steps,
                    })
                    .expect("trace serializes"),
                );
            }
            totals.push(e.total);
        }
        let m = mean(&totals);
        means.push((variant, m));
        out.rows.push(row(cfg, dataset, label, p.seed, m, reps, format!("mean of {reps} episodes")));
    }
    if means.len() == 2 {
        let (v, m) = if means[1].1 > means[0].1 { means[1] } else { means[0] };
        out.rows.push(row(
            cfg,
            dataset,
            kind.name().to_string(),
            p.seed,
            m,
            reps,
            format!("best of gu-r/bu-n: {}", v.name()),
        ));
    }
    Ok(out)
}

/// In-memory copy of everything written to disk.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub dataset: String,
    pub results: Vec<ResultRow>,
    pub curves: Vec<CurveRow>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub tdrop: Vec<TdropRow>,
    pub detector: Vec<DetectorRow>,
}

/// Runs every configured method for every seed and writes `results.csv`,
/// `curves.csv`, `traces.ndjson`, `diagnostics.csv`, `tdrop_rrise.csv`,
/// `detector.csv`, `config.json`, `schema.json` and `checkpoints/` under
/// `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentSummary, HarnessError> {
    cfg.validate()?;
    let (spec, graph) = cfg.load_data()?;
    let prepared: Vec<Prepared> = cfg
        .seeds
        .par_iter()
        .map(|&s| prepare(&spec, &graph, cfg, s).map_err(|e| e.context(format!("seed {s}"))))
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(&Prepared, Method)> = prepared
        .iter()
        .flat_map(|p| cfg.methods.iter().map(move |m| (p, *m)))
        .collect();
    let outputs: Vec<MethodOutput> = jobs
        .par_iter()
        .map(|&(p, m)| {
            match m {
                Method::Rule(k) => run_rule(cfg, &spec.name, p, k),
                _ => run_learned(cfg, &spec.name, p, m),
            }
            .map_err(|e| e.context(format!("seed {} method {m}", p.seed)))
        })
        .collect::<Result<_, _>>()?;

    let mut summary = ExperimentSummary {
        dataset: spec.name.clone(),
        detector: prepared.iter().map(|p| p.detector_row.clone()).collect(),
        ..Default::default()
    };
    let ck_dir = out_dir.join("checkpoints");
    fs::create_dir_all(&ck_dir).map_err(|e| HarnessError::io(&ck_dir, e))?;
    let mut traces = String::new();
    for o in outputs {
        summary.results.extend(o.rows);
        summary.curves.extend(o.curves);
        summary.diagnostics.extend(o.diagnostics);
        summary.tdrop.extend(o.tdrop);
        for line in o.traces {
            traces.push_str(&line);
            traces.push('\n');
        }
        for (name, body) in o.checkpoints {
            let p = ck_dir.join(name);
            fs::write(&p, body).map_err(|e| HarnessError::io(&p, e))?;
        }
    }
    write_csv(&out_dir.join("results.csv"), &summary.results)?;
    write_csv(&out_dir.join("curves.csv"), &summary.curves)?;
    write_csv(&out_dir.join("diagnostics.csv"), &summary.diagnostics)?;
    write_csv(&out_dir.join("tdrop_rrise.csv"), &summary.tdrop)?;
    write_csv(&out_dir.join("detector.csv"), &summary.detector)?;
    let write = |name: &str, body: String| {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(|e| HarnessError::io(&p, e))
    };
    if cfg.write_traces {
        write("traces.ndjson", traces)?;
    }
    write("config.json", serde_json::to_string_pretty(cfg).expect("config serializes"))?;
    write("schema.json", serde_json::to_string_pretty(&schema_document()).expect("schema serializes"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::report::read_csv;

    fn quick(methods: Vec<Method>, episodes: usize) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(SyntheticSpec::weibo_mini(1).scaled(0.3).unwrap()),
            seeds: vec![3],
            horizon: 3,
            episodes,
            last_k: 2,
            methods,
            calibration_episodes: 4,
            controllable_fraction: 0.5,
            detector: TrainConfig {
                epochs: 20,
                hidden_dim: 8,
                layers: 2,
                learning_rate: 0.05,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            Method::Learned,
            Method::Ablation(Ablation::Step),
            Method::Ablation(Ablation::Delay),
            Method::Ablation(Ablation::NoBaseline),
            Method::Rule(RuleKind::RandomPlus),
        ] {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("hier".parse::<Method>().is_err());
    }

    #[test]
    fn random_only_gives_one_row_and_three_points() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&quick(vec![Method::Rule(RuleKind::Random)], 3), dir.path()).unwrap();
        let rows: Vec<ResultRow> = read_csv(&dir.path().join("results.csv")).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows, s.results);
        let curve: Vec<CurveRow> = read_csv(&dir.path().join("curves.csv")).unwrap();
        assert_eq!(curve.len(), 3);
    }

    #[test]
    fn learned_run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_experiment(&quick(vec![Method::Learned, Method::Rule(RuleKind::Dcg)], 4), dir.path()).unwrap();
        let methods: Vec<&str> = s.results.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(methods, ["hier-linucb", "dcg/gu-r", "dcg/bu-n", "dcg"]);
        for f in ["results.csv", "curves.csv", "traces.ndjson", "diagnostics.csv", "tdrop_rrise.csv", "detector.csv", "config.json", "schema.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(dir.path().join("checkpoints/hier-linucb-seed3-subgraph.json").exists());
        assert_eq!(s.diagnostics.len(), 1);
        assert!(s.diagnostics[0].sigma2 + 1e-12 >= s.diagnostics[0].sigma2_prime);
        let back: ExperimentConfig = serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
        assert_eq!(back, quick(vec![Method::Learned, Method::Rule(RuleKind::Dcg)], 4));
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        for cfg in [
            ExperimentConfig { seeds: vec![], ..quick(vec![Method::Learned], 1) },
            ExperimentConfig { alpha: -1.0, ..quick(vec![Method::Learned], 1) },
            ExperimentConfig { controllable_fraction: 0.0, ..quick(vec![Method::Learned], 1) },
        ] {
            let e = run_experiment(&cfg, dir.path()).unwrap_err();
            assert!(e.is_config(), "{e}");
        }
    }
}
