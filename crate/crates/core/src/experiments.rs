//! Seeded experiment pipelines and their pass/fail checks.
//!
//! Each experiment runs its seeds concurrently and returns flat per-seed
//! rows plus summary statistics. [`run_experiment`] writes a JSON report,
//! a CSV of the rows and a JSON list of checks into an output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baselines::baselines;
use crate::cbm::{
    capacity_sweep, cbm_impurity, intervention_curve, spurious_experiment, train_cbm, Bottleneck,
    CbmConfig, CbmData, Component, InterventionKind, DEFAULT_CORRUPTION,
};
use crate::data::{gen_correlated_concepts, gen_impure_reps, gen_pure_reps, RepresentationSet};
use crate::error::{Error, Result};
use crate::niche::{nis, NicheConfig};
use crate::numeric::{mean, spearman, welch_t_test};
use crate::purity::{ois, ProbeConfig};
use crate::report::{write_json, TOOL_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Table1,
    Capacity,
    Intervention,
    Spurious,
    ProbeRobustness,
    BottleneckCorrelation,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Table1,
        Experiment::Capacity,
        Experiment::Intervention,
        Experiment::Spurious,
        Experiment::ProbeRobustness,
        Experiment::BottleneckCorrelation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::Capacity => "capacity",
            Experiment::Intervention => "intervention",
            Experiment::Spurious => "spurious",
            Experiment::ProbeRobustness => "probe-robustness",
            Experiment::BottleneckCorrelation => "bottleneck-correlation",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment `{s}`")))
    }
}

fn require_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    Ok(())
}

fn p_value(a: &[f64], b: &[f64]) -> f64 {
    welch_t_test(a, b).unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------- table 1

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Config {
    pub n: usize,
    pub k: usize,
    pub offdiag: f64,
    pub probe: ProbeConfig,
    pub niche: NicheConfig,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            n: 3000,
            k: 5,
            offdiag: 0.25,
            probe: ProbeConfig::purity_probe(),
            niche: NicheConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub seed: u64,
    pub condition: String,
    pub ois: f64,
    pub nis: f64,
    pub mig: f64,
    pub sap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
    /// `<metric>_<condition>` → mean over seeds.
    pub means: BTreeMap<String, f64>,
    /// Welch p-value per metric, pure vs impure.
    pub p_values: BTreeMap<String, f64>,
}

impl Table1 {
    pub fn column(&self, condition: &str, metric: fn(&Table1Row) -> f64) -> Vec<f64> {
        self.rows.iter().filter(|r| r.condition == condition).map(metric).collect()
    }
}

pub const METRICS: [(&str, fn(&Table1Row) -> f64); 4] = [
    ("ois", |r| r.ois),
    ("nis", |r| r.nis),
    ("mig", |r| r.mig),
    ("sap", |r| r.sap),
];

pub fn table1(seeds: &[u64], cfg: &Table1Config) -> Result<Table1> {
    require_seeds(seeds)?;
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let data = gen_correlated_concepts(cfg.n, cfg.k, cfg.offdiag, seed)?;
            let conditions = [("pure", gen_pure_reps(&data, seed)?), ("impure", gen_impure_reps(&data, seed)?)];
            conditions
                .into_iter()
                .map(|(condition, reps)| {
                    let b = baselines(&reps, &data, seed)?;
                    Ok(Table1Row {
                        seed,
                        condition: condition.to_owned(),
                        ois: ois(&reps, &data, &cfg.probe, seed)?,
                        nis: nis(&reps, &data, &cfg.niche, seed)?.nis,
                        mig: b.mig,
                        sap: b.sap,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Table1 {
        rows: per_seed.into_iter().flatten().collect(),
        means: BTreeMap::new(),
        p_values: BTreeMap::new(),
    };
    for (name, metric) in METRICS {
        let pure = out.column("pure", metric);
        let impure = out.column("impure", metric);
        out.means.insert(format!("{name}_pure"), mean(&pure));
        out.means.insert(format!("{name}_impure"), mean(&impure));
        out.p_values.insert(name.to_owned(), p_value(&pure, &impure));
    }
    Ok(out)
}

/// OIS of the ground-truth labels used as their own representations.
pub fn identity_ois(seeds: &[u64], cfg: &Table1Config) -> Result<Vec<f64>> {
    require_seeds(seeds)?;
    seeds
        .par_iter()
        .map(|&seed| {
            let data = gen_correlated_concepts(cfg.n, cfg.k, cfg.offdiag, seed)?;
            ois(&RepresentationSet::from_concepts(&data), &data, &cfg.probe, seed)
        })
        .collect()
}

// ------------------------------------------------------ probe robustness

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub seed: u64,
    pub metric: String,
    pub hidden: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRobustness {
    pub rows: Vec<RobustnessRow>,
    /// Seed-mean per helper architecture, keyed `<metric> <hidden>`.
    pub means: BTreeMap<String, f64>,
    pub ois_spread: f64,
    pub nis_spread: f64,
}

pub const PSI_HIDDEN: [&[usize]; 3] = [&[32], &[64], &[128]];
pub const F_HIDDEN: [&[usize]; 3] = [&[16, 16], &[20, 20], &[64, 64]];

fn hidden_label(h: &[usize]) -> String {
    let parts: Vec<String> = h.iter().map(ToString::to_string).collect();
    format!("[{}]", parts.join(","))
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// OIS under each ψ architecture and NIS under each niche-classifier
/// architecture, on the `table1` pure condition.
pub fn probe_robustness(seeds: &[u64], cfg: &Table1Config) -> Result<ProbeRobustness> {
    require_seeds(seeds)?;
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let data = gen_correlated_concepts(cfg.n, cfg.k, cfg.offdiag, seed)?;
            let reps = gen_pure_reps(&data, seed)?;
            let mut rows = Vec::new();
            for hidden in PSI_HIDDEN {
                let probe = cfg.probe.clone().with_hidden(hidden.to_vec());
                rows.push(RobustnessRow {
                    seed,
                    metric: "ois".into(),
                    hidden: hidden_label(hidden),
                    value: ois(&reps, &data, &probe, seed)?,
                });
            }
            for hidden in F_HIDDEN {
                let niche = NicheConfig {
                    classifier: cfg.niche.classifier.clone().with_hidden(hidden.to_vec()),
                    ..cfg.niche.clone()
                };
                rows.push(RobustnessRow {
                    seed,
                    metric: "nis".into(),
                    hidden: hidden_label(hidden),
                    value: nis(&reps, &data, &niche, seed)?.nis,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<RobustnessRow> = per_seed.into_iter().flatten().collect();
    let mut means = BTreeMap::new();
    let mut seed_mean = |metric: &str, hidden: &[usize]| {
        let label = hidden_label(hidden);
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.metric == metric && r.hidden == label)
            .map(|r| r.value)
            .collect();
        let m = mean(&vals);
        means.insert(format!("{metric} {label}"), m);
        m
    };
    let ois_means: Vec<f64> = PSI_HIDDEN.iter().map(|h| seed_mean("ois", h)).collect();
    let nis_means: Vec<f64> = F_HIDDEN.iter().map(|h| seed_mean("nis", h)).collect();
    Ok(ProbeRobustness {
        ois_spread: spread(&ois_means),
        nis_spread: spread(&nis_means),
        rows,
        means,
    })
}

// ------------------------------------------------- bottleneck correlation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub seed: u64,
    pub bottleneck: Bottleneck,
    pub task_accuracy: f64,
    pub concept_accuracy: f64,
    pub max_inter_concept_corr: f64,
}

/// Sigmoid and logits CBMs trained on TabularToy(0) with the default
/// architecture.
pub fn bottleneck_correlation(seeds: &[u64]) -> Result<Vec<CorrelationRow>> {
    require_seeds(seeds)?;
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let data = CbmData::tabular_toy(0.0, seed)?;
            [Bottleneck::Sigmoid, Bottleneck::Logits]
                .into_iter()
                .map(|bottleneck| {
                    let model = train_cbm(&data.train, &CbmConfig::new(bottleneck), seed)?;
                    let eval = model.evaluate(&data.test)?;
                    Ok(CorrelationRow {
                        seed,
                        bottleneck,
                        task_accuracy: eval.task_accuracy,
                        concept_accuracy: eval.concept_accuracy,
                        max_inter_concept_corr: eval.max_inter_concept_corr,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

// --------------------------------------------------------------- capacity

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityRecord {
    pub seed: u64,
    pub component: Component,
    pub capacity: usize,
    pub task_accuracy: f64,
    pub concept_accuracy: f64,
    pub concept_auc: f64,
    pub ois: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub capacities: Vec<usize>,
    pub rows: Vec<CapacityRecord>,
    pub encoder_mean_ois: Vec<f64>,
    pub predictor_mean_ois: Vec<f64>,
    pub encoder_spearman: f64,
    pub encoder_range: f64,
    pub predictor_range: f64,
}

pub const CAPACITIES: [usize; 4] = [4, 16, 64, 128];

/// Encoder and predictor capacity sweeps of a sigmoid CBM on
/// TabularToy(0).
pub fn capacity(seeds: &[u64], capacities: &[usize]) -> Result<CapacityResult> {
    require_seeds(seeds)?;
    let base = CbmConfig::new(Bottleneck::Sigmoid);
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let data = CbmData::tabular_toy(0.0, seed)?;
            let mut rows = Vec::new();
            for component in [Component::Encoder, Component::Predictor] {
                for r in capacity_sweep(&data, component, capacities, &base, seed)? {
                    rows.push(CapacityRecord {
                        seed,
                        component,
                        capacity: r.capacity,
                        task_accuracy: r.task_accuracy,
                        concept_accuracy: r.concept_accuracy,
                        concept_auc: r.concept_auc,
                        ois: r.ois,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<CapacityRecord> = per_seed.into_iter().flatten().collect();
    let mean_ois = |component: Component| -> Vec<f64> {
        capacities
            .iter()
            .map(|&c| {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.component == component && r.capacity == c)
                    .map(|r| r.ois)
                    .collect();
                mean(&v)
            })
            .collect()
    };
    let encoder_mean_ois = mean_ois(Component::Encoder);
    let predictor_mean_ois = mean_ois(Component::Predictor);
    let caps: Vec<f64> = capacities.iter().map(|&c| c as f64).collect();
    let encoder_spearman = if capacities.len() > 1 {
        spearman(&caps, &encoder_mean_ois).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok(CapacityResult {
        capacities: capacities.to_vec(),
        encoder_range: spread(&encoder_mean_ois),
        predictor_range: spread(&predictor_mean_ois),
        encoder_mean_ois,
        predictor_mean_ois,
        encoder_spearman,
        rows,
    })
}

// ----------------------------------------------------------- intervention

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub seed: u64,
    pub pair: String,
    pub model: String,
    pub accuracy_curve: Vec<f64>,
    pub gain: f64,
    pub ois: f64,
    pub nis: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub seed: u64,
    pub pair: String,
    /// Model whose accuracy changes least (or drops most) under full
    /// intervention.
    pub degrader: String,
    pub degrader_more_impure: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionResult {
    pub records: Vec<InterventionRecord>,
    pub pairs: Vec<PairOutcome>,
}

/// Number of random intervention orders averaged per curve.
pub const ORDERS: u64 = 10;

/// Model pairs: `(pair, model, config)`. The first pair differs only in
/// the bottleneck; the second in predictor capacity.
pub fn intervention_models() -> Vec<(&'static str, &'static str, CbmConfig)> {
    vec![
        ("bottleneck", "sigmoid", CbmConfig::new(Bottleneck::Sigmoid).with_predictor_hidden(&[16, 8])),
        ("bottleneck", "logits", CbmConfig::new(Bottleneck::Logits).with_predictor_hidden(&[16, 8])),
        ("capacity", "logits-high", CbmConfig::new(Bottleneck::Logits).with_predictor_hidden(&[32, 16])),
        ("capacity", "logits-low", CbmConfig::new(Bottleneck::Logits).with_predictor_hidden(&[8, 4])),
    ]
}

pub fn intervention(seeds: &[u64]) -> Result<InterventionResult> {
    require_seeds(seeds)?;
    let orders: Vec<u64> = (0..ORDERS).collect();
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let data = CbmData::tabular_toy(0.0, seed)?;
            intervention_models()
                .into_iter()
                .map(|(pair, name, cfg)| {
                    let model = train_cbm(&data.train, &cfg, seed)?;
                    let kind = InterventionKind::for_bottleneck(cfg.bottleneck);
                    let order_seeds: Vec<u64> = orders.iter().map(|o| seed.wrapping_mul(1000).wrapping_add(*o)).collect();
                    let curve = intervention_curve(&model, &data.test, kind, &order_seeds)?;
                    let impurity = cbm_impurity(&model, &data.test, &ProbeConfig::default(), &NicheConfig::default(), seed)?;
                    Ok(InterventionRecord {
                        seed,
                        pair: pair.to_owned(),
                        model: name.to_owned(),
                        gain: curve.gain(),
                        accuracy_curve: curve.mean_accuracy,
                        ois: impurity.ois,
                        nis: impurity.nis,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<InterventionRecord> = per_seed.into_iter().flatten().collect();
    let pairs = records
        .chunks(2)
        .map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let (worse, better) = if a.gain <= b.gain { (a, b) } else { (b, a) };
            PairOutcome {
                seed: a.seed,
                pair: a.pair.clone(),
                degrader: worse.model.clone(),
                degrader_more_impure: worse.ois > better.ois && worse.nis > better.nis,
            }
        })
        .collect();
    Ok(InterventionResult { records, pairs })
}

// --------------------------------------------------------------- spurious

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpuriousRow {
    pub seed: u64,
    pub training: String,
    pub task_accuracy: f64,
    pub concept_accuracy: f64,
    pub concept_auc: f64,
    pub ois: f64,
    pub nis: f64,
}

pub fn spurious(seeds: &[u64]) -> Result<Vec<SpuriousRow>> {
    require_seeds(seeds)?;
    let base = CbmConfig::new(Bottleneck::Sigmoid);
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let r = spurious_experiment(&base, DEFAULT_CORRUPTION, seed)?;
            Ok([("clean", r.clean), ("corrupted", r.corrupted)].map(|(training, m)| SpuriousRow {
                seed,
                training: training.to_owned(),
                task_accuracy: m.evaluation.task_accuracy,
                concept_accuracy: m.evaluation.concept_accuracy,
                concept_auc: m.evaluation.concept_auc,
                ois: m.impurity.ois,
                nis: m.impurity.nis,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

// ---------------------------------------------------------------- reports

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub criterion: String,
    pub passed: bool,
    pub observed: String,
}

impl Check {
    fn new(criterion: impl Into<String>, passed: bool, observed: impl Into<String>) -> Self {
        Self {
            criterion: criterion.into(),
            passed,
            observed: observed.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub config_echo: Value,
    pub summary: BTreeMap<String, f64>,
    pub p_values: BTreeMap<String, f64>,
    pub rows: Vec<Value>,
    pub checks: Vec<Check>,
    pub tool_version: String,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn count_where<T>(items: &[T], pred: impl Fn(&T) -> bool) -> usize {
    items.iter().filter(|x| pred(x)).count()
}

/// At least 4 of every 5 seeds (rounded up).
fn majority(hits: usize, total: usize) -> bool {
    hits * 5 >= total * 4
}

fn rows_of<T: Serialize>(rows: &[T]) -> Result<Vec<Value>> {
    rows.iter().map(|r| serde_json::to_value(r).map_err(Error::from)).collect()
}

fn build_report(experiment: Experiment, seeds: &[u64]) -> Result<ExperimentReport> {
    let mut report = ExperimentReport {
        experiment,
        seeds: seeds.to_vec(),
        config_echo: json!({ "experiment": experiment, "seeds": seeds }),
        summary: BTreeMap::new(),
        p_values: BTreeMap::new(),
        rows: Vec::new(),
        checks: Vec::new(),
        tool_version: TOOL_VERSION.to_owned(),
    };
    match experiment {
        Experiment::Table1 => {
            let cfg = Table1Config::default();
            let t = table1(seeds, &cfg)?;
            let identity = identity_ois(seeds, &cfg)?;
            report.config_echo["table1"] = serde_json::to_value(&cfg)?;
            let m = |k: &str| t.means[k];
            let p = |k: &str| t.p_values[k];
            report.checks = vec![
                Check::new("mean OIS(pure) in [0.02, 0.10]", (0.02..=0.10).contains(&m("ois_pure")), format!("{:.4}", m("ois_pure"))),
                Check::new("mean OIS(impure) in [0.15, 0.32]", (0.15..=0.32).contains(&m("ois_impure")), format!("{:.4}", m("ois_impure"))),
                Check::new("mean NIS(pure) in [0.58, 0.74]", (0.58..=0.74).contains(&m("nis_pure")), format!("{:.4}", m("nis_pure"))),
                Check::new("mean NIS(impure) > mean NIS(pure)", m("nis_impure") > m("nis_pure"), format!("{:.4} vs {:.4}", m("nis_impure"), m("nis_pure"))),
                Check::new("Welch p(OIS) < 0.05", p("ois") < 0.05, format!("{:.3e}", p("ois"))),
                Check::new("Welch p(NIS) < 0.05", p("nis") < 0.05, format!("{:.3e}", p("nis"))),
                Check::new("Welch p(MIG) > 0.05", p("mig") > 0.05, format!("{:.3}", p("mig"))),
                Check::new("Welch p(SAP) > 0.05", p("sap") > 0.05, format!("{:.3}", p("sap"))),
                Check::new(
                    "identity OIS <= 0.02 on every seed",
                    identity.iter().all(|&v| v <= 0.02),
                    format!("{identity:.4?}"),
                ),
            ];
            report.summary = t.means.clone();
            report.p_values = t.p_values.clone();
            report.rows = rows_of(&t.rows)?;
        }
        Experiment::ProbeRobustness => {
            let cfg = Table1Config::default();
            let r = probe_robustness(seeds, &cfg)?;
            report.config_echo["table1"] = serde_json::to_value(&cfg)?;
            report.checks = vec![
                Check::new("OIS spread over psi hidden < 0.05", r.ois_spread < 0.05, format!("{:.4}", r.ois_spread)),
                Check::new("NIS spread over f hidden < 0.05", r.nis_spread < 0.05, format!("{:.4}", r.nis_spread)),
            ];
            report.summary = r.means.clone();
            report.summary.insert("ois_spread".into(), r.ois_spread);
            report.summary.insert("nis_spread".into(), r.nis_spread);
            report.rows = rows_of(&r.rows)?;
        }
        Experiment::BottleneckCorrelation => {
            let rows = bottleneck_correlation(seeds)?;
            report.config_echo["cbm"] = serde_json::to_value(CbmConfig::new(Bottleneck::Sigmoid))?;
            let pairs: Vec<(&CorrelationRow, &CorrelationRow)> = rows.chunks(2).map(|c| (&c[0], &c[1])).collect();
            let mean_of = |b: Bottleneck, f: fn(&CorrelationRow) -> f64| {
                mean(&rows.iter().filter(|r| r.bottleneck == b).map(f).collect::<Vec<_>>())
            };
            let task_gap = (mean_of(Bottleneck::Sigmoid, |r| r.task_accuracy) - mean_of(Bottleneck::Logits, |r| r.task_accuracy)).abs();
            let concept_gap =
                (mean_of(Bottleneck::Sigmoid, |r| r.concept_accuracy) - mean_of(Bottleneck::Logits, |r| r.concept_accuracy)).abs();
            let larger = count_where(&pairs, |(s, l)| l.max_inter_concept_corr > s.max_inter_concept_corr);
            report.checks = vec![
                Check::new("task accuracy within 2 points", task_gap <= 0.02, format!("{:.2} points", 100.0 * task_gap)),
                Check::new("concept accuracy within 2 points", concept_gap <= 0.02, format!("{:.2} points", 100.0 * concept_gap)),
                Check::new(
                    "logits max inter-concept |corr| larger on >= 4/5 seeds",
                    majority(larger, pairs.len()),
                    format!("{larger}/{}", pairs.len()),
                ),
            ];
            report.summary.insert("task_accuracy_gap".into(), task_gap);
            report.summary.insert("concept_accuracy_gap".into(), concept_gap);
            report.rows = rows_of(&rows)?;
        }
        Experiment::Capacity => {
            let r = capacity(seeds, &CAPACITIES)?;
            report.config_echo["capacities"] = json!(CAPACITIES);
            report.checks = vec![
                Check::new(
                    "Spearman(capacity, encoder OIS) <= -0.8",
                    r.encoder_spearman <= -0.8,
                    format!("{:.3}", r.encoder_spearman),
                ),
                Check::new(
                    "encoder OIS range > predictor OIS range",
                    r.encoder_range > r.predictor_range,
                    format!("{:.4} vs {:.4}", r.encoder_range, r.predictor_range),
                ),
            ];
            report.summary.insert("encoder_spearman".into(), r.encoder_spearman);
            report.summary.insert("encoder_range".into(), r.encoder_range);
            report.summary.insert("predictor_range".into(), r.predictor_range);
            report.rows = rows_of(&r.rows)?;
        }
        Experiment::Intervention => {
            let r = intervention(seeds)?;
            report.config_echo["models"] = serde_json::to_value(intervention_models())?;
            for pair in ["bottleneck", "capacity"] {
                let outcomes: Vec<&PairOutcome> = r.pairs.iter().filter(|p| p.pair == pair).collect();
                let hits = count_where(&outcomes, |p| p.degrader_more_impure);
                report.checks.push(Check::new(
                    format!("{pair} pair: degrading model has higher OIS and NIS on >= 4/5 seeds"),
                    majority(hits, outcomes.len()),
                    format!("{hits}/{}", outcomes.len()),
                ));
            }
            let sigmoid: Vec<&InterventionRecord> = r.records.iter().filter(|m| m.model == "sigmoid").collect();
            let gains: Vec<f64> = sigmoid.iter().map(|m| m.gain).collect();
            let mean_gain = mean(&gains);
            report.checks.push(Check::new(
                "sigmoid curve final >= initial (seed mean)",
                mean_gain >= 0.0,
                format!("mean gain {mean_gain:+.4}"),
            ));
            report.summary.insert("sigmoid_mean_gain".into(), mean_gain);
            report.rows = rows_of(&r.records)?;
        }
        Experiment::Spurious => {
            let rows = spurious(seeds)?;
            report.config_echo["corruption_prob"] = json!(DEFAULT_CORRUPTION);
            let pairs: Vec<(&SpuriousRow, &SpuriousRow)> = rows.chunks(2).map(|c| (&c[0], &c[1])).collect();
            let n = pairs.len();
            let impurer = count_where(&pairs, |(c, s)| s.ois > c.ois && s.nis > c.nis);
            let worse = count_where(&pairs, |(c, s)| c.task_accuracy - s.task_accuracy >= 0.03);
            let auc_close = count_where(&pairs, |(c, s)| (c.concept_auc - s.concept_auc).abs() <= 0.03);
            report.checks = vec![
                Check::new("corrupted OIS and NIS higher on >= 4/5 seeds", majority(impurer, n), format!("{impurer}/{n}")),
                Check::new("corrupted task accuracy >= 3 points lower on >= 4/5 seeds", majority(worse, n), format!("{worse}/{n}")),
                Check::new("concept AUC within 3 points on >= 4/5 seeds", majority(auc_close, n), format!("{auc_close}/{n}")),
            ];
            report.rows = rows_of(&rows)?;
        }
    }
    Ok(report)
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !(n.is_u64() || n.is_i64()) => crate::report::round_sig(f).map_or_else(String::new, |f| f.to_string()),
            _ => n.to_string(),
        },
        Value::Array(items) => items.iter().map(csv_cell).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}

fn write_rows_csv(path: &Path, rows: &[Value]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let Some(Value::Object(first)) = rows.first() else {
        w.flush()?;
        return Ok(());
    };
    let header: Vec<String> = first.keys().cloned().collect();
    w.write_record(&header)?;
    for row in rows {
        w.write_record(header.iter().map(|k| csv_cell(&row[k])))?;
    }
    w.flush()?;
    Ok(())
}

/// Paths written by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOutputs {
    pub report: PathBuf,
    pub rows: PathBuf,
    pub checks: PathBuf,
}

/// Runs `experiment` over `seeds`, writing `<name>.json`, `<name>.csv` and
/// `<name>_checks.json` into `out_dir`.
pub fn run_experiment(experiment: Experiment, seeds: &[u64], out_dir: &Path) -> Result<(ExperimentReport, ExperimentOutputs)> {
    require_seeds(seeds)?;
    let report = build_report(experiment, seeds)?;
    std::fs::create_dir_all(out_dir)?;
    let name = experiment.name();
    let outputs = ExperimentOutputs {
        report: out_dir.join(format!("{name}.json")),
        rows: out_dir.join(format!("{name}.csv")),
        checks: out_dir.join(format!("{name}_checks.json")),
    };
    write_json(&outputs.report, &report)?;
    write_rows_csv(&outputs.rows, &report.rows)?;
    write_json(&outputs.checks, &json!({ "experiment": name, "passed": report.passed(), "checks": report.checks }))?;
    Ok((report, outputs))
}
