//! Prediction of a model ranking for one target dataset from a set of
//! open-source bundles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::capability::{aggregate_target_rank, class_rankings, transfer_rankings};
use crate::config::{Branch, CapabilityPlan, RunConfig};
use crate::data::{AssetBundle, DenseMatrix, ModelZoo, ZStats, DEFAULT_STD_EPS};
use crate::error::{Error, Result};
use crate::eval::metrics::{borda_ensemble, RankVector};
use crate::gap_bridge::{
    apply_gap_to_texts, compute_class_gap_vectors, prepare_texts, transfer_gap_vectors, GapLevel, GapTable,
    ModalityStats,
};
use crate::ranker::LinearRanker;
use crate::scalar::Scalar;
use crate::text_scores::{
    assemble_score_vector, inject_noise_blocks, FeatureSet, Provenance, ScoreVector, ScoringTexts,
};
use crate::transport::{build_cost_matrix, filter_source_classes, solve_ot, solve_partial_ot, uniform, TransportPlan};

/// Mixes a run seed with identifiers into a per-stream seed.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for p in parts {
        for b in p.bytes().chain(std::iter::once(0xff)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Assets each role needs, reported as `dataset/model: role` strings.
pub fn missing_assets<T: Scalar>(
    target: Option<&AssetBundle<T>>,
    sources: &[&AssetBundle<T>],
    zoo: &ModelZoo,
) -> Vec<String> {
    let mut missing = Vec::new();
    let check_text = |b: &AssetBundle<T>, missing: &mut Vec<String>| {
        for id in &zoo.model_ids {
            match b.models.get(id) {
                None => missing.push(format!("{}/{id}: classifier_embeddings", b.dataset_id)),
                Some(a) if a.caption_embeddings.iter().all(|c| c.rows() == 0) => {
                    missing.push(format!("{}/{id}: caption_embeddings", b.dataset_id))
                }
                _ => {}
            }
        }
    };
    if let Some(t) = target {
        check_text(t, &mut missing);
    }
    for s in sources {
        check_text(s, &mut missing);
        for id in &zoo.model_ids {
            if let Some(a) = s.models.get(id) {
                if a.class_accuracies.is_none() {
                    missing.push(format!("{}/{id}: class_accuracies", s.dataset_id));
                }
                if a.class_gap_vectors.is_none() && a.image_embeddings.is_none() {
                    missing.push(format!("{}/{id}: gap_table", s.dataset_id));
                }
            }
        }
    }
    missing.sort();
    missing.dedup();
    missing
}

/// Texts of one model on one dataset mapped into the gap space.
#[derive(Clone, Debug)]
pub struct PreparedTexts<T> {
    pub stats: ZStats<T>,
    pub captions: Vec<DenseMatrix<T>>,
    pub synonyms: Vec<DenseMatrix<T>>,
    pub classifiers: DenseMatrix<T>,
}

/// Z-scores captions, synonyms and classifiers with the caption statistics
/// of the dataset and L2-normalizes each row.
pub fn prepare_model_texts<T: Scalar>(bundle: &AssetBundle<T>, model_id: &str) -> Result<PreparedTexts<T>> {
    let a = bundle.model(model_id)?;
    let blocks: Vec<&DenseMatrix<T>> = a.caption_embeddings.iter().collect();
    let stats = ZStats::fit(&DenseMatrix::vstack(&blocks)?, T::of(DEFAULT_STD_EPS))?;
    let mut cls = prepare_texts(std::slice::from_ref(&a.classifier_embeddings), Some(&stats))?;
    Ok(PreparedTexts {
        captions: prepare_texts(&a.caption_embeddings, Some(&stats))?,
        synonyms: prepare_texts(&a.synonym_embeddings, Some(&stats))?,
        classifiers: cls.pop().expect("one block"),
        stats,
    })
}

/// Gap table of one model on one open-source bundle, from the stored table
/// or recomputed from image embeddings.
pub fn bundle_gap_table<T: Scalar>(bundle: &AssetBundle<T>, model_id: &str, level: GapLevel) -> Result<GapTable<T>> {
    let a = bundle.model(model_id)?;
    let table = match (&a.class_gap_vectors, &a.image_embeddings) {
        (Some(g), _) => GapTable::new(model_id, g.clone(), &a.missing_gap_rows)?,
        (None, Some(images)) => {
            let text = prepare_model_texts(bundle, model_id)?.stats;
            let present: Vec<&DenseMatrix<T>> = images.iter().filter(|b| b.rows() > 0).collect();
            let image = ZStats::fit(&DenseMatrix::vstack(&present)?, T::of(DEFAULT_STD_EPS))?;
            let stats = ModalityStats { image, text };
            compute_class_gap_vectors(model_id, images, &a.classifier_embeddings, Some(&stats))?
        }
        (None, None) => {
            return Err(Error::MissingAssets(vec![format!("{}/{model_id}: gap_table", bundle.dataset_id)]));
        }
    };
    Ok(match level {
        GapLevel::ClassMean => table,
        GapLevel::DatasetMean => table.to_dataset_mean(),
    })
}

/// Transport plans between the kept source classes and a target.
#[derive(Clone, Debug)]
pub struct Bridge<T> {
    /// Indices into the concatenated source classes.
    pub kept: Vec<usize>,
    pub full: TransportPlan<T>,
    pub partial: TransportPlan<T>,
}

fn stacked_names<T: Scalar>(sources: &[&AssetBundle<T>]) -> Result<DenseMatrix<T>> {
    let blocks: Vec<&DenseMatrix<T>> = sources.iter().map(|b| &b.classname_embeddings).collect();
    DenseMatrix::vstack(&blocks)
}

pub fn build_bridge<T: Scalar>(
    sources: &[&AssetBundle<T>],
    target: &AssetBundle<T>,
    cfg: &RunConfig,
) -> Result<Bridge<T>> {
    let names = stacked_names(sources)?;
    let kept = filter_source_classes(&names, &target.classname_embeddings, T::of(cfg.lambda_filter))?;
    let cost = build_cost_matrix(&names.select_rows(&kept), &target.classname_embeddings, cfg.exponentiate_cost)?;
    let u = uniform::<T>(kept.len());
    let v = uniform::<T>(target.class_count());
    let full = solve_ot(&cost, &u, &v, cfg.ot_method, &cfg.sinkhorn)?;
    let partial = solve_partial_ot(&cost, &u, &v, T::of(cfg.mass_fraction))?;
    Ok(Bridge { kept, full, partial })
}

/// Gaps of `model_id` estimated for the target classes through `bridge`.
pub fn transferred_gaps<T: Scalar>(
    sources: &[&AssetBundle<T>],
    bridge: &Bridge<T>,
    model_id: &str,
    k_t: usize,
    level: GapLevel,
) -> Result<GapTable<T>> {
    let tables = sources.iter().map(|b| bundle_gap_table(b, model_id, level)).collect::<Result<Vec<_>>>()?;
    let source = GapTable::concat(&tables)?.select_rows(&bridge.kept);
    transfer_gap_vectors(&bridge.full, &source, k_t)
}

/// Per-model accuracies on every source class, `[model][class]`.
fn source_accuracies<T: Scalar>(sources: &[&AssetBundle<T>], zoo: &ModelZoo) -> Result<Vec<Vec<T>>> {
    zoo.model_ids
        .iter()
        .map(|id| {
            let mut acc = Vec::new();
            for b in sources {
                let a = b.model(id)?;
                let c = a
                    .class_accuracies
                    .as_ref()
                    .ok_or_else(|| Error::MissingAssets(vec![format!("{}/{id}: class_accuracies", b.dataset_id)]))?;
                acc.extend_from_slice(c);
            }
            Ok(acc)
        })
        .collect()
}

/// Mean transferred class rank per model (smaller is better).
pub fn capability_scores<T: Scalar>(
    sources: &[&AssetBundle<T>],
    bridge: &Bridge<T>,
    zoo: &ModelZoo,
    which: CapabilityPlan,
) -> Result<Vec<T>> {
    let ranks = class_rankings(&zoo.model_ids, &source_accuracies(sources, zoo)?)?.select_classes(&bridge.kept);
    let plan = match which {
        CapabilityPlan::Partial => &bridge.partial,
        CapabilityPlan::Full => &bridge.full,
    };
    let transferred = transfer_rankings(&ranks, plan)?;
    aggregate_target_rank(&transferred, Some(&plan.column_mass()))
}

/// Class rankings averaged uniformly over every source class.
pub fn average_rank_scores<T: Scalar>(sources: &[&AssetBundle<T>], zoo: &ModelZoo, k_t: usize) -> Result<Vec<T>> {
    let ranks = class_rankings(&zoo.model_ids, &source_accuracies(sources, zoo)?)?;
    let plan = TransportPlan::independent(None, &uniform::<T>(ranks.class_count()), &uniform::<T>(k_t))?;
    aggregate_target_rank(&transfer_rankings(&ranks, &plan)?, None)
}

/// Score vector of one model on `bundle`, optionally gap-corrected and
/// noised.
pub fn score_model<T: Scalar>(
    bundle: &AssetBundle<T>,
    model_id: &str,
    prepared: &PreparedTexts<T>,
    gaps: Option<&GapTable<T>>,
    noise: Option<(f64, u64)>,
) -> Result<ScoreVector<T>> {
    let mut captions = match gaps {
        Some(g) => apply_gap_to_texts(&prepared.captions, g)?,
        None => prepared.captions.clone(),
    };
    if let Some((sigma, seed)) = noise {
        captions = inject_noise_blocks(&captions, sigma, seed)?;
    }
    let texts =
        ScoringTexts { captions, synonyms: prepared.synonyms.clone(), classifiers: prepared.classifiers.clone() };
    let provenance = Provenance {
        noise_sigma: noise.map_or(0.0, |n| n.0),
        seed: noise.map(|n| n.1),
        gap_corrected: gaps.is_some(),
        gap_level: gaps.map(|g| g.level),
    };
    assemble_score_vector(bundle, model_id, &texts, provenance)
}

type PlainAndCorrected<T> = (Vec<ScoreVector<T>>, Vec<ScoreVector<T>>);

/// Score vectors of every zoo model on an open-source training bundle,
/// with and without gap correction. Gaps come from the other open-source
/// bundles; with none left (or none relevant) the bundle's own gaps are
/// used.
fn training_scores<T: Scalar>(
    bundle: &AssetBundle<T>,
    others: &[&AssetBundle<T>],
    zoo: &ModelZoo,
    cfg: &RunConfig,
) -> Result<PlainAndCorrected<T>> {
    let bridge = if others.is_empty() {
        None
    } else {
        match build_bridge(others, bundle, cfg) {
            Ok(b) => Some(b),
            Err(Error::NoRelevantSourceClasses { .. }) => {
                log::info!("{}: no relevant open-source classes, using its own gaps", bundle.dataset_id);
                None
            }
            Err(e) => return Err(e),
        }
    };
    let mut plain = Vec::with_capacity(zoo.len());
    let mut corrected = Vec::with_capacity(zoo.len());
    for id in &zoo.model_ids {
        let prepared = prepare_model_texts(bundle, id)?;
        let gaps = match &bridge {
            Some(b) => transferred_gaps(others, b, id, bundle.class_count(), cfg.gap_level)?,
            None => bundle_gap_table(bundle, id, cfg.gap_level)?,
        };
        plain.push(score_model(bundle, id, &prepared, None, None)?);
        corrected.push(score_model(bundle, id, &prepared, Some(&gaps), None)?);
    }
    Ok((plain, corrected))
}

fn fit_ranker<T: Scalar>(
    train: &[(ScoreVector<T>, T)],
    test: &[ScoreVector<T>],
    cfg: &RunConfig,
    datasets: &[String],
) -> Result<(LinearRanker<T>, FeatureSet)> {
    let all: Vec<&ScoreVector<T>> = train.iter().map(|(s, _)| s).chain(test).collect();
    let set = FeatureSet::resolve(&all)?;
    let rows = train.iter().map(|(s, y)| Ok((s.features(set)?, *y))).collect::<Result<Vec<_>>>()?;
    let ranker = LinearRanker::fit(&set.names(), &rows, cfg.ridge, datasets.to_vec())?;
    Ok((ranker, set))
}

/// Seed-independent state for one target: plans, the non-learning
/// branches and the two fitted rankers.
pub struct TargetContext<T> {
    pub dataset_id: String,
    pub bridge: Bridge<T>,
    pub capability: Vec<T>,
    pub average_rank: Vec<T>,
    pub imagenet: Vec<T>,
    gaps: Vec<GapTable<T>>,
    prepared: Vec<PreparedTexts<T>>,
    ranker_gap: LinearRanker<T>,
    ranker_plain: LinearRanker<T>,
    set_gap: FeatureSet,
    set_plain: FeatureSet,
}

/// Everything a target prediction reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetPrediction<T> {
    pub dataset_id: String,
    pub seed: u64,
    /// Learning branch predictions (higher = better).
    pub learning_gap: Vec<T>,
    pub learning_plain: Vec<T>,
    /// Transferred and uniform mean class ranks (lower = better).
    pub capability: Vec<T>,
    pub average_rank: Vec<T>,
    pub imagenet: Vec<T>,
    pub rankings: BTreeMap<Branch, RankVector<T>>,
}

impl<T: Scalar> TargetContext<T> {
    pub fn new(target: &AssetBundle<T>, sources: &[&AssetBundle<T>], zoo: &ModelZoo, cfg: &RunConfig) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Validation("at least one open-source bundle is required".into()));
        }
        let missing = missing_assets(Some(target), sources, zoo);
        if !missing.is_empty() {
            return Err(Error::MissingAssets(missing));
        }
        let k_t = target.class_count();
        let bridge = build_bridge(sources, target, cfg)?;
        let capability = capability_scores(sources, &bridge, zoo, cfg.capability_plan)?;
        let average_rank = average_rank_scores(sources, zoo, k_t)?;

        let mut gaps = Vec::with_capacity(zoo.len());
        let mut prepared = Vec::with_capacity(zoo.len());
        for id in &zoo.model_ids {
            gaps.push(transferred_gaps(sources, &bridge, id, k_t, cfg.gap_level)?);
            prepared.push(prepare_model_texts(target, id)?);
        }

        let mut train_gap = Vec::new();
        let mut train_plain = Vec::new();
        for (i, b) in sources.iter().enumerate() {
            let others: Vec<&AssetBundle<T>> =
                sources.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| *s).collect();
            let (plain, corrected) = training_scores(b, &others, zoo, cfg)?;
            let truth = b.ground_truth_accuracies(zoo)?;
            train_plain.extend(plain.into_iter().zip(truth.iter().copied()));
            train_gap.extend(corrected.into_iter().zip(truth));
        }
        // Target features only decide the optional feature set here.
        let probe: Vec<ScoreVector<T>> = zoo
            .model_ids
            .iter()
            .zip(&prepared)
            .map(|(id, p)| score_model(target, id, p, None, None))
            .collect::<Result<_>>()?;
        let datasets: Vec<String> = sources.iter().map(|b| b.dataset_id.clone()).collect();
        let (ranker_gap, set_gap) = fit_ranker(&train_gap, &probe, cfg, &datasets)?;
        let (ranker_plain, set_plain) = fit_ranker(&train_plain, &probe, cfg, &datasets)?;

        let imagenet = probe.iter().map(|s| s.imagenet_acc).collect();
        Ok(Self {
            dataset_id: target.dataset_id.clone(),
            bridge,
            capability,
            average_rank,
            imagenet,
            gaps,
            prepared,
            ranker_gap,
            ranker_plain,
            set_gap,
            set_plain,
        })
    }

    pub fn rankers(&self) -> (&LinearRanker<T>, &LinearRanker<T>) {
        (&self.ranker_gap, &self.ranker_plain)
    }

    pub fn target_gaps(&self) -> &[GapTable<T>] {
        &self.gaps
    }

    /// Noise-dependent predictions for one seed.
    pub fn predict(
        &self,
        target: &AssetBundle<T>,
        zoo: &ModelZoo,
        cfg: &RunConfig,
        seed: u64,
    ) -> Result<TargetPrediction<T>> {
        let mut learning_gap = Vec::with_capacity(zoo.len());
        let mut learning_plain = Vec::with_capacity(zoo.len());
        for (m, id) in zoo.model_ids.iter().enumerate() {
            let noise = Some((cfg.noise_sigma, derive_seed(seed, &[&target.dataset_id, id])));
            let p = &self.prepared[m];
            let with_gap = score_model(target, id, p, Some(&self.gaps[m]), noise)?;
            let without = score_model(target, id, p, None, noise)?;
            learning_gap.push(self.ranker_gap.predict(&with_gap.features(self.set_gap)?)?);
            learning_plain.push(self.ranker_plain.predict(&without.features(self.set_plain)?)?);
        }
        let ids = zoo.model_ids.clone();
        let swab_m = RankVector::from_scores_desc(ids.clone(), &learning_gap)?;
        let swab_c = RankVector::from_scores_asc(ids.clone(), &self.capability)?;
        let swab = borda_ensemble(&swab_m, &swab_c, T::of(cfg.alpha))?;
        let mut rankings = BTreeMap::new();
        rankings.insert(Branch::Swab, swab);
        rankings.insert(Branch::SwabM, swab_m);
        rankings.insert(Branch::SwabC, swab_c);
        rankings.insert(Branch::AvgRank, RankVector::from_scores_asc(ids.clone(), &self.average_rank)?);
        rankings.insert(Branch::Inb, RankVector::from_scores_desc(ids.clone(), &self.imagenet)?);
        rankings.insert(Branch::ModelGpt, RankVector::from_scores_desc(ids, &learning_plain)?);
        Ok(TargetPrediction {
            dataset_id: target.dataset_id.clone(),
            seed,
            learning_gap,
            learning_plain,
            capability: self.capability.clone(),
            average_rank: self.average_rank.clone(),
            imagenet: self.imagenet.clone(),
            rankings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_part() {
        let a = derive_seed(1, &["d0", "m0"]);
        assert_eq!(a, derive_seed(1, &["d0", "m0"]));
        assert_ne!(a, derive_seed(2, &["d0", "m0"]));
        assert_ne!(a, derive_seed(1, &["d0", "m1"]));
        assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
    }
}
