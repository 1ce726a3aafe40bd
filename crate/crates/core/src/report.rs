//! Metric reports and their canonical JSON form.
//!
//! Canonical JSON has object keys sorted and every real rounded to nine
//! significant digits, so reruns with the same configuration produce the
//! same bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::alignment::align;
use crate::baselines::{baselines, BaselineScores};
use crate::data::{ConceptDataset, RepresentationSet};
use crate::error::Result;
use crate::io::write_matrix_csv;
use crate::niche::{nis, NicheConfig, NicheReport};
use crate::purity::{ois_detailed, ProbeConfig};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// One grid point of the niche-impurity curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaRow {
    pub beta: f64,
    pub mean: Option<f64>,
    pub per_concept: Vec<Option<f64>>,
}

impl BetaRow {
    pub fn table(report: &NicheReport) -> Vec<BetaRow> {
        report
            .beta_grid
            .iter()
            .zip(report.mean_curve())
            .zip(report.per_beta_ni.rows())
            .map(|((&beta, mean), row)| BetaRow {
                beta,
                mean,
                per_concept: row.to_vec(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub ois: f64,
    pub nis: f64,
    pub per_beta_ni: Vec<BetaRow>,
    pub purity_matrix_path: String,
    pub alignment: Option<Vec<usize>>,
    pub baselines: Option<BaselineScores>,
    pub p_values: BTreeMap<String, f64>,
    pub config_echo: Value,
    pub seeds: Vec<u64>,
    pub tool_version: String,
}

/// Everything `score` needs besides the input tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreConfig {
    pub seed: u64,
    pub probe: ProbeConfig,
    pub niche: NicheConfig,
    pub align: bool,
    pub baselines: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            probe: ProbeConfig::purity_probe(),
            niche: NicheConfig::default(),
            align: false,
            baselines: true,
        }
    }
}

/// A scored representation set: the report plus the matrices behind it.
#[derive(Clone, Debug)]
pub struct Scored {
    pub report: MetricReport,
    pub purity: ndarray::Array2<Option<f64>>,
    pub oracle: ndarray::Array2<Option<f64>>,
}

/// OIS, NIS and (optionally) MIG/SAP for `reps`, aligning first if asked.
/// `purity_matrix_path` is recorded in the report but not written.
pub fn score(
    reps: &RepresentationSet,
    concepts: &ConceptDataset,
    cfg: &ScoreConfig,
    purity_matrix_path: &str,
    inputs: Value,
) -> Result<Scored> {
    let (reps, alignment) = if cfg.align {
        let (aligned, map) = align(reps, concepts, &cfg.probe, cfg.seed)?;
        (aligned, Some(map.mapping))
    } else {
        (reps.clone(), None)
    };
    let purity = ois_detailed(&reps, concepts, &cfg.probe, cfg.seed)?;
    let niche = nis(&reps, concepts, &cfg.niche, cfg.seed)?;
    let base = if cfg.baselines {
        Some(baselines(&reps, concepts, cfg.seed)?)
    } else {
        None
    };
    let mut echo = serde_json::to_value(cfg)?;
    echo["inputs"] = inputs;
    Ok(Scored {
        report: MetricReport {
            ois: purity.ois,
            nis: niche.nis,
            per_beta_ni: BetaRow::table(&niche),
            purity_matrix_path: purity_matrix_path.to_owned(),
            alignment,
            baselines: base,
            p_values: BTreeMap::new(),
            config_echo: echo,
            seeds: vec![cfg.seed],
            tool_version: TOOL_VERSION.to_owned(),
        },
        purity: purity.purity.values,
        oracle: purity.oracle.values,
    })
}

/// Rounds to nine significant digits; non-finite values become `null`.
pub fn round_sig(v: f64) -> Option<f64> {
    v.is_finite().then(|| format!("{v:.8e}").parse().expect("formatted float parses"))
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => n
            .as_f64()
            .and_then(round_sig)
            .and_then(serde_json::Number::from_f64)
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        // serde_json's map is ordered by key.
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// Canonical pretty-printed JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = canonicalize(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, to_canonical_json(value)?)?;
    Ok(())
}

/// Writes the report, the purity matrix and the NI curve into `dir`;
/// returns the report path. `csv` selects a flat `key,value` report
/// instead of JSON.
pub fn write_score_outputs(dir: &Path, scored: &Scored, csv: bool) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join(&scored.report.purity_matrix_path), scored.purity.view())?;
    write_matrix_csv(&dir.join("oracle_matrix.csv"), scored.oracle.view())?;

    let mut w = csv::Writer::from_path(dir.join("per_beta_ni.csv"))?;
    let k = scored.purity.ncols();
    let mut header = vec!["beta".to_owned(), "mean".to_owned()];
    header.extend((1..=k).map(|j| format!("c_{j}")));
    w.write_record(&header)?;
    let fmt = |v: Option<f64>| v.and_then(round_sig).map_or_else(String::new, |v| v.to_string());
    for row in &scored.report.per_beta_ni {
        let mut rec = vec![fmt(Some(row.beta)), fmt(row.mean)];
        rec.extend(row.per_concept.iter().map(|&v| fmt(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;

    if csv {
        let path = dir.join("report.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["key", "value"])?;
        let r = &scored.report;
        let mut rows = vec![
            ("ois".to_owned(), fmt(Some(r.ois))),
            ("nis".to_owned(), fmt(Some(r.nis))),
            ("purity_matrix_path".to_owned(), r.purity_matrix_path.clone()),
        ];
        if let Some(b) = &r.baselines {
            rows.push(("mig".to_owned(), fmt(Some(b.mig))));
            rows.push(("sap".to_owned(), fmt(Some(b.sap))));
        }
        if let Some(a) = &r.alignment {
            let joined: Vec<String> = a.iter().map(ToString::to_string).collect();
            rows.push(("alignment".to_owned(), joined.join(" ")));
        }
        rows.push(("seeds".to_owned(), r.seeds.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")));
        rows.push(("tool_version".to_owned(), r.tool_version.clone()));
        for (k, v) in rows {
            w.write_record([k, v])?;
        }
        w.flush()?;
        Ok(path)
    } else {
        let path = dir.join("report.json");
        write_json(&path, &scored.report)?;
        Ok(path)
    }
}
