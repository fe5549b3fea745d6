use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use swab_core::data::DenseMatrix;
use swab_core::ranker::{rank_from_predictions, LinearRanker};
use swab_core::text_scores::{classification_scores, granularity_scores, inject_noise, zero_shot_classify};

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix<f64> {
    let v = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::new(rows, cols, v).unwrap()
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

/// Brute force: confusion counts from a cosine argmax, then accuracy and
/// the per-class F1 average.
fn scores_oracle(captions: &[DenseMatrix<f64>], cls: &DenseMatrix<f64>) -> (f64, f64) {
    let k = cls.rows();
    let mut pairs = Vec::new();
    for (t, block) in captions.iter().enumerate() {
        for x in block.row_iter() {
            let mut best = 0;
            for j in 1..k {
                if cos(x, cls.row(j)) > cos(x, cls.row(best)) {
                    best = j;
                }
            }
            pairs.push((t, best));
        }
    }
    let acc = pairs.iter().filter(|(t, p)| t == p).count() as f64 / pairs.len() as f64;
    let mut f1 = 0.0;
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count() as f64;
        let fneg = pairs.iter().filter(|&&(t, p)| t == c && p != c).count() as f64;
        if tp > 0.0 {
            f1 += 2.0 * tp / (2.0 * tp + fp + fneg);
        }
    }
    (acc, f1 / k as f64)
}

fn random_task(rng: &mut ChaCha8Rng) -> (Vec<DenseMatrix<f64>>, Vec<DenseMatrix<f64>>, DenseMatrix<f64>) {
    let k = rng.random_range(2..6);
    let d = rng.random_range(2..8);
    let cls = random_matrix(rng, k, d);
    let caps = (0..k)
        .map(|_| {
            let n = rng.random_range(1..6);
            random_matrix(rng, n, d)
        })
        .collect();
    let syns = (0..k).map(|_| random_matrix(rng, 2, d)).collect();
    (caps, syns, cls)
}

#[test]
fn classification_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let (caps, _, cls) = random_task(&mut rng);
        let (acc, f1) = classification_scores(&caps, &cls).unwrap();
        let (oa, of1) = scores_oracle(&caps, &cls);
        assert!((acc - oa).abs() <= 1e-12);
        assert!((f1 - of1).abs() <= 1e-12);
    }
}

#[test]
fn ties_go_to_lowest_index() {
    let cls = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
    let items = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
    assert_eq!(zero_shot_classify(&items, &cls).unwrap(), vec![0]);
    let zero = DenseMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
    assert!(zero_shot_classify(&zero, &cls).is_err());
}

#[test]
fn granularity_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let (caps, syns, cls) = random_task(&mut rng);
        let k = cls.rows();
        let g = granularity_scores(&caps, &syns, &cls).unwrap();
        let fisher: f64 = (0..k)
            .map(|j| (0..k).filter(|&i| i != j).map(|i| cos(cls.row(i), cls.row(j))).fold(f64::MIN, f64::max))
            .sum::<f64>()
            / k as f64;
        let mean_cos =
            |b: &DenseMatrix<f64>, c: usize| b.row_iter().map(|x| cos(x, cls.row(c))).sum::<f64>() / b.rows() as f64;
        let silhouette: f64 = (0..k)
            .map(|j| (0..k).filter(|&i| i != j).map(|i| mean_cos(&caps[j], i)).fold(f64::MIN, f64::max))
            .sum::<f64>()
            / k as f64;
        let n: usize = caps.iter().map(|b| b.rows()).sum();
        let dispersion: f64 =
            (0..k).map(|j| caps[j].row_iter().map(|x| cos(x, cls.row(j))).sum::<f64>()).sum::<f64>() / n as f64;
        let sc: f64 =
            (0..k).map(|j| syns[j].row_iter().map(|x| cos(x, cls.row(j))).sum::<f64>()).sum::<f64>() / (2 * k) as f64;
        assert!((g.fisher - fisher).abs() <= 1e-12);
        assert!((g.silhouette - silhouette).abs() <= 1e-12);
        assert!((g.dispersion - dispersion).abs() <= 1e-12);
        assert!((g.synonym_consistency.unwrap() - sc).abs() <= 1e-12);
    }
}

#[test]
fn missing_synonyms_give_none() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (caps, _, cls) = random_task(&mut rng);
    let empty: Vec<DenseMatrix<f64>> = (0..cls.rows()).map(|_| DenseMatrix::zeros(0, cls.cols())).collect();
    assert!(granularity_scores(&caps, &empty, &cls).unwrap().synonym_consistency.is_none());
}

#[test]
fn noise_has_expected_moments() {
    let base = DenseMatrix::zeros(200, 50);
    let noisy = inject_noise(&base, 0.3, 42).unwrap();
    let v = noisy.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.01);
    assert!((var.sqrt() - 0.3).abs() < 0.01);
    assert_eq!(inject_noise(&base, 0.3, 42).unwrap(), noisy);
    assert_ne!(inject_noise(&base, 0.3, 43).unwrap(), noisy);
    assert_eq!(inject_noise(&base, 0.0, 42).unwrap(), base);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_ignore_row_scale(seed in any::<u64>(), s in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (caps, syns, cls) = random_task(&mut rng);
        let scaled: Vec<DenseMatrix<f64>> = caps.iter().map(|b| b.scaled(s)).collect();
        let a = classification_scores(&caps, &cls).unwrap();
        let b = classification_scores(&scaled, &cls.scaled(1.0 / s)).unwrap();
        prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        let g1 = granularity_scores(&caps, &syns, &cls).unwrap();
        let g2 = granularity_scores(&scaled, &syns, &cls.scaled(s)).unwrap();
        prop_assert!((g1.silhouette - g2.silhouette).abs() < 1e-9);
        prop_assert!((g1.dispersion - g2.dispersion).abs() < 1e-9);
    }

    #[test]
    fn scores_ignore_caption_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (caps, syns, cls) = random_task(&mut rng);
        let reversed: Vec<DenseMatrix<f64>> = caps
            .iter()
            .map(|b| b.select_rows(&(0..b.rows()).rev().collect::<Vec<_>>()))
            .collect();
        let a = classification_scores(&caps, &cls).unwrap();
        let b = classification_scores(&reversed, &cls).unwrap();
        prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        let g1 = granularity_scores(&caps, &syns, &cls).unwrap();
        let g2 = granularity_scores(&reversed, &syns, &cls).unwrap();
        prop_assert!((g1.dispersion - g2.dispersion).abs() < 1e-12);
    }

    #[test]
    fn ranker_is_row_order_invariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(Vec<f64>, f64)> = (0..12)
            .map(|_| (vec![rng.random(), rng.random(), rng.random()], rng.random()))
            .collect();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(0, 5);
        let a = LinearRanker::fit(&["a", "b", "c"], &rows, 1e-3, vec![]).unwrap();
        let b = LinearRanker::fit(&["a", "b", "c"], &shuffled, 1e-3, vec![]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ranker_beats_the_constant_model(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(Vec<f64>, f64)> = (0..15)
            .map(|_| {
                let x: Vec<f64> = vec![rng.random(), rng.random()];
                let y = 0.4 + 0.3 * x[0] - 0.2 * x[1] + 0.1 * rng.random::<f64>();
                (x, y)
            })
            .collect();
        let r = LinearRanker::fit(&["a", "b"], &rows, 1e-3, vec![]).unwrap();
        let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
        let sse = |f: &dyn Fn(&[f64]) -> f64| rows.iter().map(|(x, y)| (f(x) - y).powi(2)).sum::<f64>();
        prop_assert!(sse(&|x| r.predict(x).unwrap()) <= sse(&|_| mean) + 1e-12);
    }

    #[test]
    fn ranks_follow_predictions(preds in prop::collection::vec(-1.0f64..1.0, 2..10)) {
        let r = rank_from_predictions(&preds).unwrap();
        let squashed: Vec<f64> = preds.iter().map(|x| x.tanh() * 5.0).collect();
        prop_assert_eq!(r, rank_from_predictions(&squashed).unwrap());
    }
}

#[test]
fn constant_features_are_inactive() {
    let rows: Vec<(Vec<f64>, f64)> = (0..6).map(|i| (vec![i as f64, 1.0], 0.1 * i as f64)).collect();
    let r = LinearRanker::fit(&["x", "c"], &rows, 0.0, vec![]).unwrap();
    assert_eq!(r.active, vec![true, false]);
    assert_eq!(r.weights[1], 0.0);
    assert!((r.predict(&[8.0, 99.0]).unwrap() - 0.8).abs() < 1e-9);
}
