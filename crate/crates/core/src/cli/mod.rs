//! Config-driven commands behind the `qmci` binary.
//!
//! Every command reads one JSON config (unknown keys are rejected), runs,
//! and writes its outputs atomically into an output directory. Relative
//! paths inside a config resolve against the config file's directory.
//! Outputs depend only on the config, so reruns are byte-identical.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::distloader::{
    discretized_normal, divergence_metrics, exact_pmf_loader, rescale, standard_circuit, train_hwe_with,
    walk_binomial_pmf, DistributionCircuit, Norm, StandardCircuit, TrainOptions,
};
use crate::error::{QmciError, Result};
use crate::fouriermc::{qmci_estimate, quantity_for_dim, Budget, QmciResult, QuantityKind};
use crate::pbuilder::{autocall_combine, build_instrument, InstrumentSpec, PayoffConfig, SnappedThreshold};
use crate::qae::{QaeConfig, QaeKind};
use crate::qcore::{outcome_pmf, QuantumCircuit};
use crate::resources::{
    ft_report, ft_resources, instrument_plan, nisq_report, payoff_plan, FtProblem, FtSolution,
    QmciPlan,
};
use crate::robustness::{amplitude_sweep_with, SweepConfig};
use crate::util::write_atomic;

/// Process exit code for an error: 1 for I/O, 2 for a bad config, 3 for a
/// numeric failure.
pub fn exit_code(e: &QmciError) -> i32 {
    match e {
        QmciError::Io(_) => 1,
        QmciError::Invalid(_) | QmciError::Schema(_) | QmciError::Dimension(_) | QmciError::Unsupported(_) => 2,
        QmciError::Budget(_) | QmciError::Infeasible(_) | QmciError::Numeric(_) => 3,
    }
}

/// Parse a config, rejecting unknown keys.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| QmciError::Schema(e.to_string()))
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<(T, PathBuf)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| QmciError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((parse_config(&text)?, base))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| QmciError::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes files under one directory and remembers what was written.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| QmciError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.dir.join(name);
        write_atomic(&p, contents.as_bytes()).map_err(|e| QmciError::Io(format!("{}: {e}", p.display())))?;
        self.written.push(p);
        Ok(())
    }
}

/// Where a distribution circuit comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSource {
    Standard(StandardCircuit),
    /// A DistributionCircuit JSON file.
    File(PathBuf),
    /// Exact loader for a discretised normal.
    Normal(NormalGrid),
    /// Exact loader for explicit probabilities on x_l + k delta.
    Pmf {
        values: Vec<f64>,
        #[serde(default)]
        x_l: f64,
        #[serde(default = "one")]
        delta: f64,
    },
    /// Exact loader for the quantum-walk binomial on 2^n_qubits points
    /// (trials = 2^n_qubits - 1).
    Binomial { n_qubits: usize, p: f64 },
}

fn one() -> f64 {
    1.0
}

/// A normal density sampled on 2^n_qubits points spanning [x_l, x_u]
/// inclusive (default mean -/+ 5 sd).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalGrid {
    pub n_qubits: usize,
    pub mean: f64,
    pub sd: f64,
    #[serde(default)]
    pub x_l: Option<f64>,
    #[serde(default)]
    pub x_u: Option<f64>,
}

impl NormalGrid {
    fn grid(&self) -> Result<(usize, f64, f64)> {
        if self.n_qubits == 0 || self.n_qubits > 20 {
            return Err(QmciError::invalid(format!("n_qubits {} outside 1..=20", self.n_qubits)));
        }
        if !(self.sd > 0.0 && self.sd.is_finite() && self.mean.is_finite()) {
            return Err(QmciError::invalid("normal needs a finite mean and positive sd"));
        }
        let lo = self.x_l.unwrap_or(self.mean - 5.0 * self.sd);
        let hi = self.x_u.unwrap_or(self.mean + 5.0 * self.sd);
        if !(lo < hi) {
            return Err(QmciError::invalid(format!("empty range [{lo}, {hi}]")));
        }
        let n = 1usize << self.n_qubits;
        Ok((n, lo, (hi - lo) / (n - 1) as f64))
    }

    fn pmf(&self) -> Result<(Vec<f64>, f64, f64)> {
        let (n, lo, d) = self.grid()?;
        Ok((discretized_normal(n, self.mean, self.sd, lo, d), lo, d))
    }
}

impl DistSource {
    pub fn load(&self, base: &Path) -> Result<DistributionCircuit> {
        let dc = match self {
            DistSource::Standard(k) => standard_circuit(*k),
            DistSource::File(p) => {
                let p = base.join(p);
                let text = std::fs::read_to_string(&p).map_err(|e| QmciError::Io(format!("{}: {e}", p.display())))?;
                DistributionCircuit::from_json(&text)?
            }
            DistSource::Normal(g) => {
                let (pmf, lo, d) = g.pmf()?;
                rescale(&exact_pmf_loader(&pmf)?, 0, lo, d)?
            }
            DistSource::Pmf { values, x_l, delta } => rescale(&exact_pmf_loader(values)?, 0, *x_l, *delta)?,
            DistSource::Binomial { n_qubits, p } => {
                if *n_qubits == 0 || *n_qubits > 12 {
                    return Err(QmciError::invalid("binomial loader supports 1..=12 qubits"));
                }
                let n = (1usize << n_qubits) - 1;
                exact_pmf_loader(&walk_binomial_pmf(n, *p)?)?
            }
        };
        dc.validate()?;
        Ok(dc)
    }
}

/// A probability vector given directly or read off a circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PmfSource {
    Values(Vec<f64>),
    Normal(NormalGrid),
    /// Marginal of one register of a simulated circuit.
    Circuit {
        source: DistSource,
        #[serde(default)]
        dim: usize,
    },
}

impl PmfSource {
    pub fn pmf(&self, base: &Path) -> Result<Vec<f64>> {
        match self {
            PmfSource::Values(v) => Ok(v.clone()),
            PmfSource::Normal(g) => Ok(g.pmf()?.0),
            PmfSource::Circuit { source, dim } => {
                let dc = source.load(base)?;
                outcome_pmf(&dc.circuit, &dc.dim(*dim)?.qubits)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistLoadConfig {
    pub source: DistSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistMetricsConfig {
    pub p: PmfSource,
    pub q: PmfSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistTrainConfig {
    pub target: PmfSource,
    pub n_layers: usize,
    pub norm: Norm,
    pub seed: u64,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    /// Grid metadata attached to the trained circuit.
    #[serde(default)]
    pub x_l: f64,
    #[serde(default = "one")]
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistCommand {
    Load,
    Metrics,
    Train,
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    n_layers: usize,
    norm: Norm,
    final_cost: f64,
    sweeps: usize,
    angles: &'a [Vec<f64>],
}

/// `dist load|metrics|train`.
pub fn cmd_dist(sub: DistCommand, config: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    match sub {
        DistCommand::Load => {
            let (cfg, base): (DistLoadConfig, _) = read_config(config)?;
            let dc = cfg.source.load(&base)?;
            let mut out = Outputs::new(out_dir)?;
            out.write("distribution.json", &to_json(&dc)?)?;
            Ok(out.written)
        }
        DistCommand::Metrics => {
            let (cfg, base): (DistMetricsConfig, _) = read_config(config)?;
            let r = divergence_metrics(&cfg.p.pmf(&base)?, &cfg.q.pmf(&base)?)?;
            let mut out = Outputs::new(out_dir)?;
            out.write("metrics.json", &to_json(&r)?)?;
            Ok(out.written)
        }
        DistCommand::Train => {
            let (cfg, base): (DistTrainConfig, _) = read_config(config)?;
            let target = cfg.target.pmf(&base)?;
            let mut opts = TrainOptions::default();
            if let Some(m) = cfg.max_sweeps {
                opts.max_sweeps = m;
            }
            if let Some(t) = cfg.tol {
                opts.tol = t;
            }
            let r = train_hwe_with(&target, cfg.n_layers, cfg.norm, cfg.seed, &opts)?;
            let dc = rescale(&r.circuit, 0, cfg.x_l, cfg.delta)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| QmciError::Io(e.to_string());
            w.write_record(["sweep", "cost", "best_cost"]).map_err(csv_err)?;
            let mut best = f64::INFINITY;
            for (i, c) in r.trace.iter().enumerate() {
                best = best.min(*c);
                w.write_record([i.to_string(), c.to_string(), best.to_string()]).map_err(csv_err)?;
            }
            let trace = String::from_utf8(w.into_inner().map_err(|e| QmciError::Io(e.to_string()))?)
                .map_err(|e| QmciError::Io(e.to_string()))?;
            let summary = TrainSummary {
                n_layers: cfg.n_layers,
                norm: cfg.norm,
                final_cost: r.final_cost,
                sweeps: r.trace.len(),
                angles: &r.angles,
            };
            let mut out = Outputs::new(out_dir)?;
            out.write("circuit.json", &to_json(&dc)?)?;
            out.write("trace.csv", &trace)?;
            out.write("train.json", &to_json(&summary)?)?;
            Ok(out.written)
        }
    }
}

/// QAE settings other than the budget and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaeSettings {
    pub kind: QaeKind,
    #[serde(default)]
    pub p_max_fail: Option<f64>,
    #[serde(default)]
    pub shots_m0: Option<u64>,
    #[serde(default)]
    pub shots_other: Option<u64>,
    #[serde(default)]
    pub posterior_grid: Option<usize>,
    #[serde(default)]
    pub iqae_shots: Option<u64>,
}

impl QaeSettings {
    fn config(&self, seed: u64) -> Result<QaeConfig> {
        let mut c = QaeConfig::new(self.kind, 1, seed);
        if let Some(v) = self.p_max_fail {
            c.p_max_fail = v;
        }
        if let Some(v) = self.shots_m0 {
            c.shots_m0 = v;
        }
        if let Some(v) = self.shots_other {
            c.shots_other = v;
        }
        if let Some(v) = self.posterior_grid {
            c.posterior_grid = v;
        }
        if let Some(v) = self.iqae_shots {
            c.iqae_shots = v;
        }
        c.validate()?;
        Ok(c)
    }
}

/// One quantity on one register of a distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityConfig {
    pub kind: QuantityKind,
    #[serde(default)]
    pub dim: usize,
    /// Indicator qubit for conditional quantities and the Bernoulli quantity.
    #[serde(default)]
    pub condition: Option<usize>,
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub x_star: Option<f64>,
}

/// What `estimate` and `resources` work on: a quantity of a distribution,
/// or an instrument built on a base distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub distribution: DistSource,
    #[serde(default)]
    pub quantity: Option<QuantityConfig>,
    #[serde(default)]
    pub instrument: Option<InstrumentSpec>,
    pub qae: QaeSettings,
    #[serde(default)]
    pub q_total: Option<u64>,
    #[serde(default)]
    pub target_rmse: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Report the NISQ resources of the run instead of executing it.
    #[serde(default)]
    pub resource_only: bool,
}

enum Target {
    Quantity(QuantityConfig),
    Instrument(InstrumentSpec),
}

impl EstimateConfig {
    fn target(&self) -> Result<Target> {
        match (&self.quantity, &self.instrument) {
            (Some(q), None) => Ok(Target::Quantity(q.clone())),
            (None, Some(i)) => Ok(Target::Instrument(i.clone())),
            _ => Err(QmciError::Schema("give exactly one of quantity and instrument".into())),
        }
    }

    fn budget(&self) -> Result<Budget> {
        let (q, r) = match &self.instrument {
            Some(i) => (self.q_total.or(i.q_budget), self.target_rmse.or(i.target_rmse)),
            None => (self.q_total, self.target_rmse),
        };
        match (q, r) {
            (Some(q), None) => Ok(Budget::Uses(q)),
            (None, Some(r)) => Ok(Budget::TargetRmse(r)),
            _ => Err(QmciError::Schema("give exactly one of q_total and target_rmse".into())),
        }
    }

    /// Resource plan of the run this config describes.
    pub fn plan(&self, base: &Path) -> Result<QmciPlan> {
        self.plan_with(base, self.budget()?)
    }

    fn plan_with(&self, base: &Path, budget: Budget) -> Result<QmciPlan> {
        let dc = self.distribution.load(base)?;
        let qae = self.qae.config(self.seed)?;
        match self.target()? {
            Target::Quantity(q) => {
                payoff_plan(&dc, q.kind, q.dim, q.condition, q.window, q.x_star, &qae, budget)
            }
            Target::Instrument(spec) => instrument_plan(&dc, &spec, &qae, budget),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegResult {
    pub label: String,
    pub weight: f64,
    pub offset: f64,
    /// Instrument levels as requested and as snapped onto register grids.
    pub thresholds: Vec<SnappedThreshold>,
    pub result: QmciResult,
}

/// Output of `estimate` for an instrument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstrumentResult {
    /// Expected payoff in the quantity's units: sum of weight (estimate - offset).
    pub payoff: f64,
    pub legs: Vec<LegResult>,
}

fn run_leg(dc: &DistributionCircuit, c: &PayoffConfig, qae: &QaeConfig, budget: Budget, seed: u64) -> Result<QmciResult> {
    let cond = match c.condition {
        Some(i) => Some(dc.indicator(i)?),
        None => None,
    };
    let spec = quantity_for_dim(dc, c.quantity, c.integration_dim, c.support_window, c.x_star)?;
    let mut cfg = qae.clone();
    cfg.seed = seed;
    qmci_estimate(dc, &spec, c.integration_dim, cond, &cfg, budget)
}

/// `estimate`: run QMCI (or, with resource_only, count it).
pub fn cmd_estimate(config: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (cfg, base): (EstimateConfig, _) = read_config(config)?;
    let budget = cfg.budget()?;
    let target = cfg.target()?;
    if cfg.resource_only {
        let rep = nisq_report(&cfg.plan(&base)?)?;
        let mut out = Outputs::new(out_dir)?;
        out.write("resources.json", &rep.to_json()?)?;
        out.write("resources.csv", &rep.to_csv()?)?;
        return Ok(out.written);
    }
    let dc = cfg.distribution.load(&base)?;
    let qae = cfg.qae.config(cfg.seed)?;
    let json = match target {
        Target::Quantity(q) => {
            let spec = quantity_for_dim(&dc, q.kind, q.dim, q.window, q.x_star)?;
            to_json(&qmci_estimate(&dc, &spec, q.dim, q.condition, &qae, budget)?)?
        }
        Target::Instrument(spec) => {
            let (idc, legs) = build_instrument(&dc, &spec)?;
            let mut results = Vec::with_capacity(legs.len());
            for (i, c) in legs.iter().enumerate() {
                let seed = crate::util::derive_seed(cfg.seed, &[i as u64]);
                results.push(run_leg(&idc, c, &qae, budget, seed)?);
            }
            let est: Vec<f64> = results.iter().map(|r| r.estimate).collect();
            let payoff = autocall_combine(&legs, &est)?;
            let legs = legs
                .iter()
                .zip(results)
                .map(|(c, result)| LegResult {
                    label: c.label.clone(),
                    weight: c.weight,
                    offset: c.offset(),
                    thresholds: c.thresholds.clone(),
                    result,
                })
                .collect();
            to_json(&InstrumentResult { payoff, legs })?
        }
    };
    let mut out = Outputs::new(out_dir)?;
    out.write("estimate.json", &json)?;
    Ok(out.written)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceMode {
    Nisq,
    Ft,
    FtTight,
}

/// Circuits to count: explicit circuits run once each, or the run an
/// estimate config describes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSource {
    Circuits(Vec<QuantumCircuit>),
    Estimate(Box<EstimateConfig>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcesConfig {
    pub mode: ResourceMode,
    pub plan: PlanSource,
    /// Fixed synthesis tolerance for explicit circuits in the ft modes; an
    /// estimate plan with a target RMSE is optimised instead.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

/// `resources`: NISQ or fault-tolerant counts of a plan.
pub fn cmd_resources(config: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (cfg, base): (ResourcesConfig, _) = read_config(config)?;
    let mut out = Outputs::new(out_dir)?;
    let tight = cfg.mode == ResourceMode::FtTight;
    match (&cfg.plan, cfg.mode) {
        (plan, ResourceMode::Nisq) => {
            let plan = match plan {
                PlanSource::Circuits(c) => QmciPlan::from_circuits(c.clone()),
                PlanSource::Estimate(e) => e.plan(&base)?,
            };
            let rep = nisq_report(&plan)?;
            out.write("resources.json", &rep.to_json()?)?;
            out.write("resources.csv", &rep.to_csv()?)?;
        }
        (PlanSource::Circuits(c), _) => {
            let eps = cfg
                .epsilon
                .ok_or_else(|| QmciError::Schema("ft modes on explicit circuits need epsilon".into()))?;
            let mut rep = ft_report(&QmciPlan::from_circuits(c.clone()), eps)?;
            if tight {
                rep.mode = "ft_tight".into();
            }
            out.write("resources.json", &rep.to_json()?)?;
            out.write("resources.csv", &rep.to_csv()?)?;
        }
        (PlanSource::Estimate(e), _) => {
            let (sol, rep): (FtSolution, _) = match (e.budget()?, cfg.epsilon) {
                (Budget::TargetRmse(r), None) => ft_resources(|b| e.plan_with(&base, b), r, tight)?,
                (b, Some(eps)) => {
                    let plan = e.plan_with(&base, b)?;
                    let mut rep = ft_report(&plan, eps)?;
                    if tight {
                        rep.mode = "ft_tight".into();
                    }
                    let p = FtProblem::from_plan(&plan)?;
                    let q = plan.q_total as f64;
                    let sol = FtSolution {
                        q: plan.q_total,
                        epsilon: eps,
                        t_count_bound: p.objective(q, eps),
                        mse: p.mse(q, eps, tight),
                        tight,
                    };
                    (sol, rep)
                }
                (Budget::Uses(_), None) => {
                    return Err(QmciError::Schema(
                        "ft modes need target_rmse (to optimise) or epsilon (to count)".into(),
                    ))
                }
            };
            out.write("resources.json", &rep.to_json()?)?;
            out.write("resources.csv", &rep.to_csv()?)?;
            out.write("ft_solution.json", &to_json(&sol)?)?;
        }
    }
    Ok(out.written)
}

/// `qae-sweep`: the config is a SweepConfig.
pub fn cmd_qae_sweep(config: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (cfg, _): (SweepConfig, _) = read_config(config)?;
    let rep = amplitude_sweep_with(&cfg)?;
    let mut out = Outputs::new(out_dir)?;
    out.write("sweep.csv", &rep.to_csv()?)?;
    out.write("sweep.json", &rep.to_json()?)?;
    Ok(out.written)
}

/// Cap rayon's global pool from a QMCI_THREADS value; None or empty leaves
/// the default.
pub fn configure_threads(value: Option<&str>) -> Result<()> {
    let Some(v) = value.map(str::trim).filter(|v| !v.is_empty()) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| QmciError::invalid(format!("QMCI_THREADS must be a positive integer, got {v:?}")))?;
    // a pool built earlier in this process wins
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
