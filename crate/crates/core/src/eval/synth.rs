//! Synthetic model zoos and datasets with known ground truth.
//!
//! Class names live in a semantic space made of a few clusters. Each model
//! sees a class through its own random projection; how well it separates
//! the classes of a cluster depends on a general skill plus a per-cluster
//! skill, so models rank consistently across semantically similar classes.
//! Images are simulated as noisy texts shifted by a per-class modality gap
//! that varies smoothly with class semantics, which makes gaps
//! transferable between similar classes but invisible to captions.
//!
//! Everything is emitted in `f32` precision so in-memory and on-disk
//! universes are identical.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::format::{read_bundle, write_bundle, MatrixEncoding};
use crate::data::{AssetBundle, ClassVocabulary, DenseMatrix, ModelAssets, ModelZoo, ZStats, DEFAULT_STD_EPS};
use crate::error::{Error, Result};
use crate::eval::metrics::RankVector;
use crate::gap_bridge::prepare_texts;
use crate::text_scores::zero_shot_classify;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_datasets: usize,
    pub classes_per_dataset: usize,
    pub n_models: usize,
    /// Dimension of the class-name embedding space.
    pub dim: usize,
    /// Smallest model embedding dimension; models use `+0`, `+4`, `+8`.
    pub model_dim: usize,
    pub semantic_clusters: usize,
    /// Fraction of a dataset's classes drawn from its home cluster.
    pub purity: f64,
    /// Spread of classes around their cluster center.
    pub class_spread: f64,
    /// Overall magnitude of the modality gap; 0 disables it.
    pub gap_scale: f64,
    /// Weight of the class-dependent part of the gap relative to the
    /// model-wide offset.
    pub gap_heterogeneity: f64,
    /// Spread of general model skill.
    pub general_skill: f64,
    /// Spread of per-cluster model skill.
    pub cluster_skill: f64,
    /// Base within-class noise of images and captions.
    pub noise: f64,
    /// Correlation between caption and image noise levels.
    pub caption_fidelity: f64,
    pub captions_per_class: usize,
    pub synonyms_per_class: usize,
    pub images_per_class: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_datasets: 6,
            classes_per_dataset: 8,
            n_models: 10,
            dim: 32,
            model_dim: 16,
            semantic_clusters: 3,
            purity: 0.75,
            class_spread: 0.6,
            gap_scale: 0.5,
            gap_heterogeneity: 1.0,
            general_skill: 0.5,
            cluster_skill: 0.5,
            noise: 0.5,
            caption_fidelity: 0.7,
            captions_per_class: 10,
            synonyms_per_class: 3,
            images_per_class: 50,
        }
    }
}

impl SynthConfig {
    /// Strongly class-dependent gaps.
    pub fn heterogeneous() -> Self {
        Self { gap_scale: 0.8, gap_heterogeneity: 3.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.n_datasets < 2 {
            return fail("a universe needs at least two datasets".into());
        }
        if self.n_models < 5 {
            return fail(format!("top-5 metrics need at least 5 models, got {}", self.n_models));
        }
        if self.classes_per_dataset < 2 {
            return fail("datasets need at least two classes".into());
        }
        if self.semantic_clusters == 0 || self.dim == 0 || self.model_dim == 0 {
            return fail("clusters and dimensions must be positive".into());
        }
        if self.captions_per_class == 0 || self.images_per_class == 0 {
            return fail("captions and images per class must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.purity) || !(0.0..=1.0).contains(&self.caption_fidelity) {
            return fail("purity and caption_fidelity must lie in [0, 1]".into());
        }
        let nonneg = [
            self.class_spread,
            self.gap_scale,
            self.gap_heterogeneity,
            self.general_skill,
            self.cluster_skill,
            self.noise,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return fail("spreads, scales and noise must be finite and nonnegative".into());
        }
        Ok(())
    }
}

/// Generated bundles with their true rankings.
#[derive(Clone, Debug)]
pub struct SyntheticUniverse {
    pub config: SynthConfig,
    pub seed: u64,
    pub zoo: ModelZoo,
    pub bundles: Vec<AssetBundle<f64>>,
    pub truth: Vec<RankVector<f64>>,
}

struct Model {
    id: String,
    dim: usize,
    projection: Vec<f64>,
    gap_map: Vec<f64>,
    gap_offset: Vec<f64>,
    general: f64,
    cluster: Vec<f64>,
    caption_skill: Vec<f64>,
}

fn round32(x: f64) -> f64 {
    x as f32 as f64
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn apply(matrix: &[f64], rows: usize, x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..rows).map(|r| matrix[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn noisy(rng: &mut ChaCha8Rng, center: &[f64], sigma: f64, n: usize) -> Vec<Vec<f64>> {
    let d = center.len();
    let per = sigma / (d as f64).sqrt();
    (0..n).map(|_| center.iter().zip(gaussian(rng, d, per)).map(|(c, e)| round32(c + e)).collect()).collect()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate_synthetic_universe(config: &SynthConfig, seed: u64) -> Result<SyntheticUniverse> {
    config.validate()?;
    let c = config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..c.semantic_clusters).map(|_| unit(gaussian(&mut rng, c.dim, 1.0))).collect();

    let models: Vec<Model> = (0..c.n_models)
        .map(|m| {
            let dim = c.model_dim + 4 * (m % 3);
            let general = c.general_skill * rng.sample::<f64, _>(StandardNormal);
            let cluster: Vec<f64> = gaussian(&mut rng, c.semantic_clusters, c.cluster_skill);
            let fidelity = c.caption_fidelity;
            let caption_skill = cluster
                .iter()
                .map(|&s| {
                    let own = general + s;
                    let spread = (c.general_skill.powi(2) + c.cluster_skill.powi(2)).sqrt();
                    fidelity * own + (1.0 - fidelity * fidelity).sqrt() * spread * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            Model {
                id: format!("vlm{m:02}"),
                dim,
                projection: gaussian(&mut rng, dim * c.dim, (1.0 / c.dim as f64).sqrt()),
                gap_map: gaussian(&mut rng, dim * c.dim, (1.0 / c.dim as f64).sqrt()),
                gap_offset: unit(gaussian(&mut rng, dim, 1.0)),
                general,
                cluster,
                caption_skill,
            }
        })
        .collect();
    let zoo = ModelZoo::new(models.iter().map(|m| m.id.clone()).collect(), models.iter().map(|m| m.dim).collect())?;
    let imagenet: Vec<f64> = models
        .iter()
        .map(|m| round32(logistic(m.general + 0.5 * c.general_skill * rng.sample::<f64, _>(StandardNormal))))
        .collect();

    let mut bundles = Vec::with_capacity(c.n_datasets);
    let mut truth = Vec::with_capacity(c.n_datasets);
    for d in 0..c.n_datasets {
        let dataset_id = format!("synth{d:02}");
        let home = d % c.semantic_clusters;
        let home_count = ((c.purity * c.classes_per_dataset as f64).round() as usize).min(c.classes_per_dataset);
        let mut clusters: Vec<usize> = (0..c.classes_per_dataset)
            .map(|j| {
                if j < home_count || c.semantic_clusters == 1 {
                    home
                } else {
                    let other = rng.random_range(0..c.semantic_clusters - 1);
                    if other >= home {
                        other + 1
                    } else {
                        other
                    }
                }
            })
            .collect();
        clusters.shuffle(&mut rng);
        let semantics: Vec<Vec<f64>> = clusters
            .iter()
            .map(|&k| {
                let e = gaussian(&mut rng, c.dim, c.class_spread / (c.dim as f64).sqrt());
                unit(centers[k].iter().zip(e).map(|(a, b)| a + b).collect())
            })
            .collect();
        let names: Vec<String> = (0..c.classes_per_dataset).map(|j| format!("{dataset_id}_class{j}")).collect();
        let name_rows: Vec<Vec<f64>> = semantics.iter().map(|e| e.iter().map(|&x| round32(x)).collect()).collect();

        let mut model_assets = std::collections::BTreeMap::new();
        let mut mean_acc = Vec::with_capacity(c.n_models);
        for (mi, model) in models.iter().enumerate() {
            let protos: Vec<Vec<f64>> = semantics.iter().map(|e| apply(&model.projection, model.dim, e)).collect();
            let classifiers: Vec<Vec<f64>> = protos
                .iter()
                .map(|p| p.iter().zip(gaussian(&mut rng, model.dim, 0.05)).map(|(a, b)| round32(a + b)).collect())
                .collect();
            let mut captions = Vec::with_capacity(c.classes_per_dataset);
            let mut synonyms = Vec::with_capacity(c.classes_per_dataset);
            for (j, p) in protos.iter().enumerate() {
                let k = clusters[j];
                let sigma = c.noise * (-model.caption_skill[k]).exp();
                captions.push(DenseMatrix::from_rows(&noisy(&mut rng, p, sigma, c.captions_per_class))?);
                if c.synonyms_per_class > 0 {
                    synonyms.push(DenseMatrix::from_rows(&noisy(&mut rng, p, 0.5 * sigma, c.synonyms_per_class))?);
                }
            }
            let cls = DenseMatrix::from_rows(&classifiers)?;
            let stacked: Vec<&DenseMatrix<f64>> = captions.iter().collect();
            let stats = ZStats::fit(&DenseMatrix::vstack(&stacked)?, DEFAULT_STD_EPS)?;
            let cls_z = prepare_texts(std::slice::from_ref(&cls), Some(&stats))?.pop().expect("one block");

            let mut gap_rows = Vec::with_capacity(c.classes_per_dataset);
            let mut accuracies = Vec::with_capacity(c.classes_per_dataset);
            for (j, p) in protos.iter().enumerate() {
                let k = clusters[j];
                let varying = apply(&model.gap_map, model.dim, &semantics[j]);
                let gap: Vec<f64> = model
                    .gap_offset
                    .iter()
                    .zip(&varying)
                    .map(|(o, v)| round32(c.gap_scale * (o + c.gap_heterogeneity * v)))
                    .collect();
                let sigma = c.noise * (-(model.general + model.cluster[k])).exp();
                let images = DenseMatrix::from_rows(&noisy(&mut rng, p, sigma, c.images_per_class))?;
                let shifted = prepare_texts(std::slice::from_ref(&images), Some(&stats))?
                    .pop()
                    .expect("one block")
                    .map_rows(|_, row, out| {
                        for ((o, &x), &g) in out.iter_mut().zip(row).zip(&gap) {
                            *o = x + g;
                        }
                    })?;
                let labels = zero_shot_classify(&shifted, &cls_z)?;
                let hits = labels.iter().filter(|&&l| l == j).count();
                accuracies.push(round32(hits as f64 / c.images_per_class as f64));
                gap_rows.push(gap);
            }
            mean_acc.push(accuracies.iter().sum::<f64>() / accuracies.len() as f64);
            model_assets.insert(
                model.id.clone(),
                ModelAssets {
                    classifier_embeddings: cls,
                    caption_embeddings: captions,
                    synonym_embeddings: synonyms,
                    class_gap_vectors: Some(DenseMatrix::from_rows(&gap_rows)?),
                    missing_gap_rows: Vec::new(),
                    image_embeddings: None,
                    class_accuracies: Some(accuracies),
                    imagenet_accuracy: Some(imagenet[mi]),
                },
            );
        }
        truth.push(RankVector::from_scores_desc(zoo.model_ids.clone(), &mean_acc)?);
        bundles.push(AssetBundle {
            dataset_id: dataset_id.clone(),
            vocabulary: ClassVocabulary::new(dataset_id, names)?,
            classname_embeddings: DenseMatrix::from_rows(&name_rows)?,
            models: model_assets,
        });
    }
    Ok(SyntheticUniverse { config: config.clone(), seed, zoo, bundles, truth })
}

#[derive(Debug, Serialize, Deserialize)]
struct UniverseManifest {
    format: String,
    seed: u64,
    config: SynthConfig,
    models: Vec<String>,
    dims: Vec<usize>,
    datasets: Vec<String>,
}

const UNIVERSE_FORMAT: &str = "SWAB-UNIVERSE";

/// Writes `universe.json` and one bundle directory per dataset.
pub fn write_universe(dir: &Path, universe: &SyntheticUniverse, encoding: MatrixEncoding) -> Result<()> {
    fs::create_dir_all(dir)?;
    for b in &universe.bundles {
        write_bundle(&dir.join(&b.dataset_id), b, encoding)?;
    }
    let manifest = UniverseManifest {
        format: UNIVERSE_FORMAT.into(),
        seed: universe.seed,
        config: universe.config.clone(),
        models: universe.zoo.model_ids.clone(),
        dims: universe.zoo.dims.clone(),
        datasets: universe.bundles.iter().map(|b| b.dataset_id.clone()).collect(),
    };
    fs::write(dir.join("universe.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Loads the bundles listed in a universe directory. Without
/// `universe.json`, every subdirectory holding a `manifest.json` is taken
/// in name order and the zoo is read off the first bundle.
pub fn read_universe(dir: &Path) -> Result<(Vec<AssetBundle<f64>>, ModelZoo)> {
    let index = dir.join("universe.json");
    let (datasets, zoo) = if index.exists() {
        let text = fs::read_to_string(&index)?;
        let m: UniverseManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format { path: index.display().to_string(), message: e.to_string() })?;
        if m.format != UNIVERSE_FORMAT {
            return Err(Error::Format {
                path: index.display().to_string(),
                message: format!("expected format {UNIVERSE_FORMAT}, found {}", m.format),
            });
        }
        (m.datasets, Some(ModelZoo::new(m.models, m.dims)?))
    } else {
        let mut names: Vec<String> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("manifest.json").exists())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        (names, None)
    };
    if datasets.is_empty() {
        return Err(Error::Empty("universe datasets"));
    }
    let bundles =
        datasets.iter().map(|d| read_bundle::<f64>(&dir.join(d)).map(|(b, _)| b)).collect::<Result<Vec<_>>>()?;
    let zoo = match zoo {
        Some(z) => z,
        None => ModelZoo::from_bundle(&bundles[0])?,
    };
    Ok((bundles, zoo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_bundle;

    fn small() -> SynthConfig {
        SynthConfig {
            n_datasets: 3,
            classes_per_dataset: 4,
            n_models: 5,
            captions_per_class: 4,
            images_per_class: 10,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn bundles_validate_and_are_deterministic() {
        let a = generate_synthetic_universe(&small(), 3).unwrap();
        for b in &a.bundles {
            assert!(validate_bundle(b, &a.zoo).is_ok(), "{b:?}");
        }
        let b = generate_synthetic_universe(&small(), 3).unwrap();
        assert_eq!(a.bundles, b.bundles);
        let c = generate_synthetic_universe(&small(), 4).unwrap();
        assert_ne!(a.bundles, c.bundles);
    }

    #[test]
    fn values_are_f32_exact() {
        let u = generate_synthetic_universe(&small(), 1).unwrap();
        let b = &u.bundles[0];
        let m = b.models.values().next().unwrap();
        assert!(m.caption_embeddings[0].values().iter().all(|&x| x == round32(x)));
        assert!(b.classname_embeddings.values().iter().all(|&x| x == round32(x)));
    }

    #[test]
    fn zero_gap_scale_emits_zero_gaps() {
        let cfg = SynthConfig { gap_scale: 0.0, ..small() };
        let u = generate_synthetic_universe(&cfg, 2).unwrap();
        for b in &u.bundles {
            for m in b.models.values() {
                assert!(m.class_gap_vectors.as_ref().unwrap().values().iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn infeasible_configs_rejected() {
        assert!(generate_synthetic_universe(&SynthConfig { n_models: 4, ..small() }, 1).is_err());
        assert!(generate_synthetic_universe(&SynthConfig { n_datasets: 1, ..small() }, 1).is_err());
        assert!(generate_synthetic_universe(&SynthConfig { purity: 1.5, ..small() }, 1).is_err());
    }

    #[test]
    fn universe_round_trips_through_disk() {
        let u = generate_synthetic_universe(&small(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_universe(dir.path(), &u, MatrixEncoding::SwabMat).unwrap();
        let (bundles, zoo) = read_universe(dir.path()).unwrap();
        assert_eq!(zoo, u.zoo);
        assert_eq!(bundles, u.bundles);
    }
}
