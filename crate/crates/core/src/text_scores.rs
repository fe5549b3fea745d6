//! Text-derived model scores: zero-shot classification of captions,
//! granularity statistics of the text classifier, and the assembled
//! feature vector consumed by the ranker.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{norm, AssetBundle, DenseMatrix};
use crate::error::{Error, Result};
use crate::gap_bridge::GapLevel;
use crate::scalar::Scalar;

pub const FEATURE_NAMES: [&str; 7] =
    ["text_top1", "text_macro_f1", "fisher", "silhouette", "dispersion", "synonym_consistency", "imagenet_acc"];

fn unit_rows<T: Scalar>(m: &DenseMatrix<T>, what: &'static str) -> Result<Vec<Vec<T>>> {
    m.row_iter()
        .enumerate()
        .map(|(r, row)| {
            let n = norm(row);
            if n == T::zero() || !n.is_finite() {
                return Err(Error::ZeroNorm { what, row: r });
            }
            Ok(row.iter().map(|&x| x / n).collect())
        })
        .collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    crate::data::dot(a, b)
}

fn check_dim<T: Scalar>(items: &DenseMatrix<T>, classifiers: &DenseMatrix<T>) -> Result<()> {
    if items.rows() > 0 && items.cols() != classifiers.cols() {
        return Err(Error::DimensionMismatch {
            what: "text embedding dimension vs classifier dimension",
            expected: classifiers.cols(),
            got: items.cols(),
        });
    }
    Ok(())
}

/// Cosine argmax over classifiers; ties go to the lowest class index.
pub fn zero_shot_classify<T: Scalar>(items: &DenseMatrix<T>, classifiers: &DenseMatrix<T>) -> Result<Vec<usize>> {
    if classifiers.rows() == 0 {
        return Err(Error::Empty("classifiers"));
    }
    check_dim(items, classifiers)?;
    let cls = unit_rows(classifiers, "classifier")?;
    classify_units(items, &cls)
}

fn classify_units<T: Scalar>(items: &DenseMatrix<T>, cls: &[Vec<T>]) -> Result<Vec<usize>> {
    items
        .row_iter()
        .enumerate()
        .map(|(r, x)| {
            if norm(x) == T::zero() {
                return Err(Error::ZeroNorm { what: "item", row: r });
            }
            // Cosine ordering equals dot-product ordering for a fixed item.
            let mut best = 0;
            let mut best_v = T::neg_infinity();
            for (j, c) in cls.iter().enumerate() {
                let v = dot(x, c);
                if v > best_v {
                    best_v = v;
                    best = j;
                }
            }
            Ok(best)
        })
        .collect()
}

/// Top-1 accuracy and macro F1 of captions classified against the
/// classifiers; the true label of a caption is its block index.
pub fn classification_scores<T: Scalar>(captions: &[DenseMatrix<T>], classifiers: &DenseMatrix<T>) -> Result<(T, T)> {
    let k = classifiers.rows();
    if captions.len() != k {
        return Err(Error::DimensionMismatch {
            what: "caption blocks vs classifiers",
            expected: k,
            got: captions.len(),
        });
    }
    if captions.iter().all(|b| b.rows() == 0) {
        return Err(Error::Empty("caption corpus"));
    }
    let cls = unit_rows(classifiers, "classifier")?;
    let mut confusion = vec![0usize; k * k];
    for (truth, block) in captions.iter().enumerate() {
        check_dim(block, classifiers)?;
        for pred in classify_units(block, &cls)? {
            confusion[truth * k + pred] += 1;
        }
    }
    Ok(confusion_scores(&confusion, k))
}

fn confusion_scores<T: Scalar>(confusion: &[usize], k: usize) -> (T, T) {
    let total: usize = confusion.iter().sum();
    let correct: usize = (0..k).map(|c| confusion[c * k + c]).sum();
    let mut f1_sum = T::zero();
    for c in 0..k {
        let tp = confusion[c * k + c];
        let predicted: usize = (0..k).map(|r| confusion[r * k + c]).sum();
        let actual: usize = confusion[c * k..(c + 1) * k].iter().sum();
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
        if precision + recall > 0.0 {
            f1_sum = f1_sum + T::of(2.0 * precision * recall / (precision + recall));
        }
    }
    (T::of_usize(correct) / T::of_usize(total), f1_sum / T::of_usize(k))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Granularity<T> {
    pub fisher: T,
    pub silhouette: T,
    pub dispersion: T,
    /// `None` when no synonyms are available.
    pub synonym_consistency: Option<T>,
}

/// Fisher, Silhouette, Dispersion and Synonym Consistency of one model on
/// one dataset.
pub fn granularity_scores<T: Scalar>(
    captions: &[DenseMatrix<T>],
    synonyms: &[DenseMatrix<T>],
    classifiers: &DenseMatrix<T>,
) -> Result<Granularity<T>> {
    let k = classifiers.rows();
    if k < 2 {
        return Err(Error::Validation("fisher and silhouette need at least two classes".into()));
    }
    if captions.len() != k {
        return Err(Error::DimensionMismatch {
            what: "caption blocks vs classifiers",
            expected: k,
            got: captions.len(),
        });
    }
    let cls = unit_rows(classifiers, "classifier")?;

    let fisher = (0..k)
        .map(|j| (0..k).filter(|&i| i != j).map(|i| dot(&cls[i], &cls[j])).fold(T::neg_infinity(), T::max))
        .sum::<T>()
        / T::of_usize(k);

    let mut silhouette = T::zero();
    let mut disp_sum = T::zero();
    let mut disp_n = 0usize;
    for (j, block) in captions.iter().enumerate() {
        check_dim(block, classifiers)?;
        let caps = unit_rows(block, "caption")?;
        if caps.is_empty() {
            return Err(Error::Validation(format!("class {j} has no captions")));
        }
        let n = T::of_usize(caps.len());
        let mut best = T::neg_infinity();
        for (i, c) in cls.iter().enumerate() {
            let mean = caps.iter().map(|x| dot(x, c)).sum::<T>() / n;
            if i == j {
                disp_sum = disp_sum + mean * n;
                disp_n += caps.len();
            } else if mean > best {
                best = mean;
            }
        }
        silhouette = silhouette + best;
    }
    silhouette = silhouette / T::of_usize(k);
    let dispersion = disp_sum / T::of_usize(disp_n);

    let synonym_consistency = if synonyms.iter().all(|b| b.rows() == 0) {
        None
    } else {
        if synonyms.len() != k {
            return Err(Error::DimensionMismatch {
                what: "synonym blocks vs classifiers",
                expected: k,
                got: synonyms.len(),
            });
        }
        let mut sum = T::zero();
        let mut count = 0usize;
        for (j, block) in synonyms.iter().enumerate() {
            check_dim(block, classifiers)?;
            for s in unit_rows(block, "synonym")? {
                sum = sum + dot(&s, &cls[j]);
                count += 1;
            }
        }
        Some(sum / T::of_usize(count))
    };

    Ok(Granularity { fisher, silhouette, dispersion, synonym_consistency })
}

/// Adds i.i.d. `N(0, sigma²)` noise to every entry, drawn from a ChaCha
/// stream seeded with `seed`.
pub fn inject_noise<T: Scalar>(emb: &DenseMatrix<T>, sigma: f64, seed: u64) -> Result<DenseMatrix<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    noise_with(emb, sigma, &mut rng)
}

/// Noise for a list of blocks from a single stream, in block order.
pub fn inject_noise_blocks<T: Scalar>(blocks: &[DenseMatrix<T>], sigma: f64, seed: u64) -> Result<Vec<DenseMatrix<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    blocks.iter().map(|b| noise_with(b, sigma, &mut rng)).collect()
}

fn noise_with<T: Scalar>(emb: &DenseMatrix<T>, sigma: f64, rng: &mut ChaCha8Rng) -> Result<DenseMatrix<T>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise sigma {sigma} must be a finite nonnegative number")));
    }
    if sigma == 0.0 {
        return Ok(emb.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    emb.map_rows(|_, row, out| {
        for (o, &x) in out.iter_mut().zip(row) {
            *o = x + T::of(normal.sample(rng));
        }
    })
}

/// How a score vector was produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub noise_sigma: f64,
    pub seed: Option<u64>,
    pub gap_corrected: bool,
    pub gap_level: Option<GapLevel>,
}

/// The seven ranker features of one (model, dataset) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector<T> {
    pub model_id: String,
    pub dataset_id: String,
    pub text_top1: T,
    pub text_macro_f1: T,
    pub fisher: T,
    pub silhouette: T,
    pub dispersion: T,
    pub synonym_consistency: Option<T>,
    /// Zero when the bundle lacks it; see `imagenet_missing`.
    pub imagenet_acc: T,
    pub imagenet_missing: bool,
    pub provenance: Provenance,
}

/// Which optional features enter the ranker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub synonyms: bool,
    pub imagenet: bool,
}

impl FeatureSet {
    pub const ALL: FeatureSet = FeatureSet { synonyms: true, imagenet: true };

    /// Uses the synonym feature only if every vector has it; mixing is an
    /// error. Imagenet is dropped if any vector lacks it.
    pub fn resolve<T>(vectors: &[&ScoreVector<T>]) -> Result<Self> {
        let with = vectors.iter().filter(|v| v.synonym_consistency.is_some()).count();
        if with != 0 && with != vectors.len() {
            return Err(Error::Validation(format!(
                "synonym features present for {with} of {} score vectors",
                vectors.len()
            )));
        }
        Ok(Self { synonyms: with != 0, imagenet: vectors.iter().all(|v| !v.imagenet_missing) })
    }

    pub fn names(&self) -> Vec<&'static str> {
        FEATURE_NAMES
            .iter()
            .enumerate()
            .filter(|&(i, _)| (i != 5 || self.synonyms) && (i != 6 || self.imagenet))
            .map(|(_, n)| *n)
            .collect()
    }
}

impl<T: Scalar> ScoreVector<T> {
    pub fn features(&self, set: FeatureSet) -> Result<Vec<T>> {
        let mut f = vec![self.text_top1, self.text_macro_f1, self.fisher, self.silhouette, self.dispersion];
        if set.synonyms {
            f.push(
                self.synonym_consistency
                    .ok_or_else(|| Error::Validation(format!("model {} lacks synonym scores", self.model_id)))?,
            );
        }
        if set.imagenet {
            f.push(self.imagenet_acc);
        }
        Ok(f)
    }
}

/// Text embeddings of one model on one dataset, already mapped into the
/// scoring space (and gap-corrected / noised as required).
#[derive(Clone, Debug)]
pub struct ScoringTexts<T> {
    pub captions: Vec<DenseMatrix<T>>,
    pub synonyms: Vec<DenseMatrix<T>>,
    pub classifiers: DenseMatrix<T>,
}

pub fn assemble_score_vector<T: Scalar>(
    bundle: &AssetBundle<T>,
    model_id: &str,
    texts: &ScoringTexts<T>,
    provenance: Provenance,
) -> Result<ScoreVector<T>> {
    let assets = bundle.model(model_id)?;
    if texts.captions.len() != bundle.class_count() {
        return Err(Error::DimensionMismatch {
            what: "caption blocks vs vocabulary",
            expected: bundle.class_count(),
            got: texts.captions.len(),
        });
    }
    let (top1, f1) = classification_scores(&texts.captions, &texts.classifiers)?;
    let g = granularity_scores(&texts.captions, &texts.synonyms, &texts.classifiers)?;
    if assets.imagenet_accuracy.is_none() {
        log::warn!("model {model_id}: imagenet accuracy missing, feature set to 0");
    }
    Ok(ScoreVector {
        model_id: model_id.to_string(),
        dataset_id: bundle.dataset_id.clone(),
        text_top1: top1,
        text_macro_f1: f1,
        fisher: g.fisher,
        silhouette: g.silhouette,
        dispersion: g.dispersion,
        synonym_consistency: g.synonym_consistency,
        imagenet_acc: assets.imagenet_accuracy.unwrap_or_else(T::zero),
        imagenet_missing: assets.imagenet_accuracy.is_none(),
        provenance,
    })
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    model_id: &'a str,
    dataset_id: &'a str,
    text_top1: f64,
    text_macro_f1: f64,
    fisher: f64,
    silhouette: f64,
    dispersion: f64,
    synonym_consistency: Option<f64>,
    imagenet_acc: f64,
    imagenet_missing: bool,
    noise_sigma: f64,
    seed: Option<u64>,
    gap_corrected: bool,
    gap_level: Option<&'static str>,
}

/// Writes one CSV row per score vector.
pub fn write_score_table<T: Scalar>(path: &Path, scores: &[ScoreVector<T>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in scores {
        w.serialize(ScoreRow {
            model_id: &s.model_id,
            dataset_id: &s.dataset_id,
            text_top1: s.text_top1.as_f64(),
            text_macro_f1: s.text_macro_f1.as_f64(),
            fisher: s.fisher.as_f64(),
            silhouette: s.silhouette.as_f64(),
            dispersion: s.dispersion.as_f64(),
            synonym_consistency: s.synonym_consistency.map(Scalar::as_f64),
            imagenet_acc: s.imagenet_acc.as_f64(),
            imagenet_missing: s.imagenet_missing,
            noise_sigma: s.provenance.noise_sigma,
            seed: s.provenance.seed,
            gap_corrected: s.provenance.gap_corrected,
            gap_level: s.provenance.gap_level.map(GapLevel::as_str),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_labels_and_tie_rule() {
        let cls = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(zero_shot_classify(&cls, &cls).unwrap(), vec![0, 1]);
        let tie = m(&[&[1.0, 1.0]]);
        assert_eq!(zero_shot_classify(&tie, &cls).unwrap(), vec![0]);
        let zero = m(&[&[0.0, 0.0]]);
        assert!(matches!(zero_shot_classify(&zero, &cls), Err(Error::ZeroNorm { .. })));
    }

    #[test]
    fn perfect_captions() {
        let cls = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let caps = vec![m(&[&[2.0, 0.0]]), m(&[&[0.0, 3.0]])];
        assert_eq!(classification_scores(&caps, &cls).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn all_predicted_into_class_zero() {
        let cls = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let caps = vec![m(&[&[1.0, 0.1]]), m(&[&[1.0, 0.2]])];
        let (top1, f1) = classification_scores(&caps, &cls).unwrap();
        assert_eq!(top1, 0.5);
        assert!((f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn granularity_constructed() {
        let cls = m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let caps: Vec<_> = (0..3).map(|j| m(&[cls.row(j), cls.row(j)])).collect();
        let g = granularity_scores(&caps, &[], &cls).unwrap();
        assert_eq!(g.fisher, 0.0);
        assert_eq!(g.dispersion, 1.0);
        assert_eq!(g.silhouette, 0.0);
        assert_eq!(g.synonym_consistency, None);
        assert!(granularity_scores(&caps[..1], &[], &m(&[&[1.0, 0.0, 0.0]])).is_err());
    }

    #[test]
    fn noise_identity_and_determinism() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(inject_noise(&x, 0.0, 7).unwrap(), x);
        assert_eq!(inject_noise(&x, 0.1, 7).unwrap(), inject_noise(&x, 0.1, 7).unwrap());
        assert_ne!(inject_noise(&x, 0.1, 7).unwrap(), inject_noise(&x, 0.1, 8).unwrap());
        assert!(inject_noise(&x, -1.0, 7).is_err());
    }

    #[test]
    fn noise_moments() {
        let x = DenseMatrix::<f64>::zeros(100, 100);
        let y = inject_noise(&x, 0.1, 3).unwrap();
        let n = y.values().len() as f64;
        let mean = y.values().iter().sum::<f64>() / n;
        let var = y.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() - 0.1).abs() < 0.005);
    }

    #[test]
    fn feature_set_resolution() {
        let base = ScoreVector {
            model_id: "a".into(),
            dataset_id: "d".into(),
            text_top1: 0.5,
            text_macro_f1: 0.4,
            fisher: 0.1,
            silhouette: 0.2,
            dispersion: 0.3,
            synonym_consistency: Some(0.6),
            imagenet_acc: 0.7,
            imagenet_missing: false,
            provenance: Provenance::default(),
        };
        let mut other = base.clone();
        other.synonym_consistency = None;
        assert!(FeatureSet::resolve(&[&base, &other]).is_err());
        let set = FeatureSet::resolve(&[&base]).unwrap();
        assert_eq!(base.features(set).unwrap().len(), 7);
        other.imagenet_missing = true;
        let set = FeatureSet::resolve(&[&other]).unwrap();
        assert_eq!(set.names(), vec!["text_top1", "text_macro_f1", "fisher", "silhouette", "dispersion"]);
    }
}
