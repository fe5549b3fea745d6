//! Leave-one-dataset-out benchmark.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Branch, RunConfig};
use crate::data::{AssetBundle, ModelZoo};
use crate::error::{Error, Result};
use crate::eval::metrics::{kendall_tau_top5, top5_recall, RankVector};
use crate::eval::pipeline::{missing_assets, TargetContext, TargetPrediction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub r5: f64,
    pub tau: f64,
    /// Size of the top-5 intersection behind `tau`.
    pub intersection: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub per_seed: Vec<SeedMetrics>,
    pub r5: MeanStd,
    pub tau: MeanStd,
    pub r5_plus_tau: MeanStd,
}

impl MethodResult {
    fn from_seeds(per_seed: Vec<SeedMetrics>) -> Self {
        let r5: Vec<f64> = per_seed.iter().map(|s| s.r5).collect();
        let tau: Vec<f64> = per_seed.iter().map(|s| s.tau).collect();
        let sum: Vec<f64> = per_seed.iter().map(|s| s.r5 + s.tau).collect();
        Self { r5: MeanStd::of(&r5), tau: MeanStd::of(&tau), r5_plus_tau: MeanStd::of(&sum), per_seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub dataset_id: String,
    /// Mean per-class accuracy of each model.
    pub true_accuracy: Vec<f64>,
    /// Mean transferred class rank of each model (lower is better).
    pub capability_rank: Vec<f64>,
    pub average_rank: Vec<f64>,
    pub methods: BTreeMap<Branch, MethodResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: RunConfig,
    pub models: Vec<String>,
    pub datasets: Vec<DatasetResult>,
    /// Per method: for each seed the metrics are averaged over datasets,
    /// then mean and std are taken across seeds.
    pub summary: BTreeMap<Branch, MethodSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub r5: MeanStd,
    pub tau: MeanStd,
    pub r5_plus_tau: MeanStd,
}

fn score(pred: &TargetPrediction<f64>, truth: &RankVector<f64>) -> Result<BTreeMap<Branch, SeedMetrics>> {
    pred.rankings
        .iter()
        .map(|(&b, r)| {
            let tau = kendall_tau_top5(r, truth)?;
            Ok((
                b,
                SeedMetrics {
                    seed: pred.seed,
                    r5: top5_recall(r, truth)?,
                    tau: tau.tau,
                    intersection: tau.intersection,
                },
            ))
        })
        .collect()
}

fn run_target(t: usize, bundles: &[AssetBundle<f64>], zoo: &ModelZoo, cfg: &RunConfig) -> Result<DatasetResult> {
    let target = &bundles[t];
    let sources: Vec<&AssetBundle<f64>> = bundles.iter().enumerate().filter(|&(i, _)| i != t).map(|(_, b)| b).collect();
    let truth_acc = target.ground_truth_accuracies(zoo)?;
    let truth = RankVector::from_scores_desc(zoo.model_ids.clone(), &truth_acc)?;
    let ctx = TargetContext::new(target, &sources, zoo, cfg)?;
    let mut per_method: BTreeMap<Branch, Vec<SeedMetrics>> = BTreeMap::new();
    for &seed in &cfg.seeds {
        let pred = ctx.predict(target, zoo, cfg, seed)?;
        for (b, m) in score(&pred, &truth)? {
            per_method.entry(b).or_default().push(m);
        }
    }
    Ok(DatasetResult {
        dataset_id: target.dataset_id.clone(),
        true_accuracy: truth_acc,
        capability_rank: ctx.capability.clone(),
        average_rank: ctx.average_rank.clone(),
        methods: per_method.into_iter().map(|(b, s)| (b, MethodResult::from_seeds(s))).collect(),
    })
}

/// Every bundle in turn is the target and the others are open-source.
pub fn run_lodo_benchmark(bundles: &[AssetBundle<f64>], zoo: &ModelZoo, cfg: &RunConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    if bundles.len() < 2 {
        return Err(Error::Validation("the benchmark needs at least two datasets".into()));
    }
    let all: Vec<&AssetBundle<f64>> = bundles.iter().collect();
    let missing = missing_assets(None, &all, zoo);
    if !missing.is_empty() {
        return Err(Error::MissingAssets(missing));
    }
    let datasets =
        (0..bundles.len()).into_par_iter().map(|t| run_target(t, bundles, zoo, cfg)).collect::<Result<Vec<_>>>()?;

    let mut summary = BTreeMap::new();
    for b in Branch::ALL {
        let seeds = cfg.seeds.len();
        let mut r5 = vec![0.0; seeds];
        let mut tau = vec![0.0; seeds];
        for d in &datasets {
            let m = &d.methods[&b];
            for (s, v) in m.per_seed.iter().enumerate() {
                r5[s] += v.r5 / datasets.len() as f64;
                tau[s] += v.tau / datasets.len() as f64;
            }
        }
        let sum: Vec<f64> = r5.iter().zip(&tau).map(|(a, b)| a + b).collect();
        summary
            .insert(b, MethodSummary { r5: MeanStd::of(&r5), tau: MeanStd::of(&tau), r5_plus_tau: MeanStd::of(&sum) });
    }
    Ok(BenchmarkReport { config: cfg.clone(), models: zoo.model_ids.clone(), datasets, summary })
}

#[derive(Serialize)]
struct DatasetRow<'a> {
    dataset: &'a str,
    method: &'static str,
    r5: f64,
    r5_std: f64,
    tau: f64,
    tau_std: f64,
    r5_plus_tau: f64,
}

#[derive(Serialize)]
struct SeedRow<'a> {
    dataset: &'a str,
    method: &'static str,
    seed: u64,
    r5: f64,
    tau: f64,
    intersection: usize,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `report.json`, `per_dataset.csv` and `per_seed.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        let mut w = csv::Writer::from_path(dir.join("per_dataset.csv"))?;
        let mut s = csv::Writer::from_path(dir.join("per_seed.csv"))?;
        for d in &self.datasets {
            for (b, m) in &d.methods {
                w.serialize(DatasetRow {
                    dataset: &d.dataset_id,
                    method: b.as_str(),
                    r5: m.r5.mean,
                    r5_std: m.r5.std,
                    tau: m.tau.mean,
                    tau_std: m.tau.std,
                    r5_plus_tau: m.r5_plus_tau.mean,
                })?;
                for p in &m.per_seed {
                    s.serialize(SeedRow {
                        dataset: &d.dataset_id,
                        method: b.as_str(),
                        seed: p.seed,
                        r5: p.r5,
                        tau: p.tau,
                        intersection: p.intersection,
                    })?;
                }
            }
        }
        for (b, m) in &self.summary {
            w.serialize(DatasetRow {
                dataset: "mean",
                method: b.as_str(),
                r5: m.r5.mean,
                r5_std: m.r5.std,
                tau: m.tau.mean,
                tau_std: m.tau.std,
                r5_plus_tau: m.r5_plus_tau.mean,
            })?;
        }
        w.flush()?;
        s.flush()?;
        Ok(())
    }

    /// One line per method, `method R5 tau R5+tau` with stds.
    pub fn summary_table(&self) -> String {
        let mut out = format!("{:<10} {:>15} {:>15} {:>15}\n", "method", "R5", "tau", "R5+tau");
        for (b, m) in &self.summary {
            out += &format!(
                "{:<10} {:>7.3} ± {:<5.3} {:>7.3} ± {:<5.3} {:>7.3} ± {:<5.3}\n",
                b.as_str(),
                m.r5.mean,
                m.r5.std,
                m.tau.mean,
                m.tau.std,
                m.r5_plus_tau.mean,
                m.r5_plus_tau.std
            );
        }
        out
    }
}
