use swab_core::config::{Branch, CapabilityPlan, RunConfig};
use swab_core::data::{AssetBundle, DenseMatrix, ModelZoo};
use swab_core::eval::{
    generate_synthetic_universe, kendall_tau_top5, top5_recall, RankVector, SynthConfig, TargetContext,
};
use swab_core::Error;

fn universe(cfg: &SynthConfig, seed: u64) -> (Vec<AssetBundle<f64>>, ModelZoo) {
    let u = generate_synthetic_universe(cfg, seed).unwrap();
    (u.bundles, u.zoo)
}

fn split(bundles: &[AssetBundle<f64>], t: usize) -> (&AssetBundle<f64>, Vec<&AssetBundle<f64>>) {
    let sources = bundles.iter().enumerate().filter(|&(i, _)| i != t).map(|(_, b)| b).collect();
    (&bundles[t], sources)
}

fn small() -> SynthConfig {
    SynthConfig { n_datasets: 4, classes_per_dataset: 6, n_models: 8, images_per_class: 20, ..SynthConfig::default() }
}

#[test]
fn zero_gaps_make_both_learning_branches_agree() {
    let (mut bundles, zoo) = universe(&small(), 3);
    for b in &mut bundles {
        let k = b.class_count();
        for a in b.models.values_mut() {
            a.class_gap_vectors = Some(DenseMatrix::zeros(k, a.dim()));
            a.image_embeddings = None;
        }
    }
    let cfg = RunConfig::default();
    let (target, sources) = split(&bundles, 0);
    let ctx = TargetContext::new(target, &sources, &zoo, &cfg).unwrap();
    let p = ctx.predict(target, &zoo, &cfg, 1).unwrap();
    for (a, b) in p.learning_gap.iter().zip(&p.learning_plain) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(p.rankings[&Branch::SwabM], p.rankings[&Branch::ModelGpt]);
}

#[test]
fn full_plan_over_all_classes_reproduces_average_rank() {
    let synth = SynthConfig { semantic_clusters: 1, ..small() };
    let (bundles, zoo) = universe(&synth, 5);
    let cfg = RunConfig { capability_plan: CapabilityPlan::Full, lambda_filter: 0.0, ..RunConfig::default() };
    let (target, sources) = split(&bundles, 1);
    let ctx = TargetContext::new(target, &sources, &zoo, &cfg).unwrap();
    let total: usize = sources.iter().map(|b| b.class_count()).sum();
    assert_eq!(ctx.bridge.kept.len(), total);
    // Uniform rows make every model's transferred mean proportional to its
    // average class rank.
    let ratio = ctx.capability[0] / ctx.average_rank[0];
    for (c, a) in ctx.capability.iter().zip(&ctx.average_rank) {
        assert!((c - ratio * a).abs() < 1e-9);
    }
    let p = ctx.predict(target, &zoo, &cfg, 1).unwrap();
    assert_eq!(p.rankings[&Branch::SwabC].ranks, p.rankings[&Branch::AvgRank].ranks);
}

#[test]
fn consistent_class_rankings_transfer_perfectly() {
    let (mut bundles, zoo) = universe(&small(), 7);
    let target_truth = bundles[0].ground_truth_accuracies(&zoo).unwrap();
    for b in bundles.iter_mut().skip(1) {
        let k = b.class_count();
        for (m, id) in zoo.model_ids.iter().enumerate() {
            b.models.get_mut(id).unwrap().class_accuracies = Some(vec![target_truth[m]; k]);
        }
    }
    let cfg = RunConfig::default();
    let (target, sources) = split(&bundles, 0);
    let ctx = TargetContext::new(target, &sources, &zoo, &cfg).unwrap();
    let p = ctx.predict(target, &zoo, &cfg, 1).unwrap();
    let truth = RankVector::from_scores_desc(zoo.model_ids.clone(), &target_truth).unwrap();
    let c = &p.rankings[&Branch::SwabC];
    assert_eq!(top5_recall(c, &truth).unwrap(), 1.0);
    assert_eq!(kendall_tau_top5(c, &truth).unwrap().tau, 1.0);
}

#[test]
fn alpha_endpoints_select_single_branches() {
    let (bundles, zoo) = universe(&small(), 11);
    let (target, sources) = split(&bundles, 2);
    for (alpha, branch) in [(1.0, Branch::SwabM), (0.0, Branch::SwabC)] {
        let cfg = RunConfig { alpha, ..RunConfig::default() };
        let ctx = TargetContext::new(target, &sources, &zoo, &cfg).unwrap();
        let p = ctx.predict(target, &zoo, &cfg, 1).unwrap();
        assert_eq!(p.rankings[&Branch::Swab].ranks, p.rankings[&branch].ranks);
    }
}

#[test]
fn seeds_only_move_noise_sensitive_outputs() {
    let (bundles, zoo) = universe(&small(), 13);
    let cfg = RunConfig::default();
    let (target, sources) = split(&bundles, 0);
    let ctx = TargetContext::new(target, &sources, &zoo, &cfg).unwrap();
    let a = ctx.predict(target, &zoo, &cfg, 1).unwrap();
    let b = ctx.predict(target, &zoo, &cfg, 2).unwrap();
    assert_eq!(a.capability, b.capability);
    assert_eq!(a.average_rank, b.average_rank);
    assert_eq!(a.imagenet, b.imagenet);
    assert_ne!(a.learning_gap, b.learning_gap);
    assert_eq!(a, ctx.predict(target, &zoo, &cfg, 1).unwrap());

    let quiet = RunConfig { noise_sigma: 0.0, ..RunConfig::default() };
    let ctx = TargetContext::new(target, &sources, &zoo, &quiet).unwrap();
    let a = ctx.predict(target, &zoo, &quiet, 1).unwrap();
    let b = ctx.predict(target, &zoo, &quiet, 2).unwrap();
    assert_eq!(a.learning_gap, b.learning_gap);
}

#[test]
fn generation_and_prediction_are_deterministic() {
    let (b1, zoo) = universe(&small(), 17);
    let (b2, _) = universe(&small(), 17);
    assert_eq!(b1, b2);
    let cfg = RunConfig::default();
    let run = |bundles: &[AssetBundle<f64>]| {
        let (target, sources) = split(bundles, 3);
        TargetContext::new(target, &sources, &zoo, &cfg).unwrap().predict(target, &zoo, &cfg, 4).unwrap()
    };
    assert_eq!(run(&b1), run(&b2));
}

#[test]
fn missing_accuracies_are_reported_by_role() {
    let (mut bundles, zoo) = universe(&small(), 19);
    let id = zoo.model_ids[2].clone();
    bundles[1].models.get_mut(&id).unwrap().class_accuracies = None;
    let (target, sources) = split(&bundles, 0);
    match TargetContext::new(target, &sources, &zoo, &RunConfig::default()) {
        Err(Error::MissingAssets(list)) => {
            assert!(list.iter().any(|s| s.contains(&id) && s.contains("class_accuracies")), "{list:?}");
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("missing accuracies went unnoticed"),
    }
}
